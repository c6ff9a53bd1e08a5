#pragma once

#include "pose_ba/types.hpp"

#include <vector>

namespace pose_ba {

/// Gaussian mixture over the non-root joint angles. Covariances are held as
/// lower Cholesky factors; the per-component log normalisers are cached.
class GmmPrior {
public:
    GmmPrior(Eigen::VectorXd weights, std::vector<Eigen::VectorXd> means, std::vector<Eigen::MatrixXd> cholesky);

    int dim() const { return static_cast<int>(means_.front().size()); }
    int components() const { return static_cast<int>(weights_.size()); }
    const Eigen::VectorXd& weights() const { return weights_; }
    const std::vector<Eigen::VectorXd>& means() const { return means_; }
    const std::vector<Eigen::MatrixXd>& cholesky() const { return cholesky_; }

    /// -log sum_i g_i N(x; mu_i, Sigma_i), via log-sum-exp.
    double negative_log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    /// Same value; writes the gradient with respect to x into grad.
    double negative_log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::VectorXd> grad) const;

    /// -log sum_i g_i |2 pi Sigma_i|^(-1/2): no x reaches a lower
    /// negative_log_likelihood, so subtracting it makes the prior >= 0.
    double nll_floor() const { return nll_floor_; }

    /// Per-component log(g_i N(x; mu_i, Sigma_i)).
    Eigen::VectorXd component_log_densities(const Eigen::Ref<const Eigen::VectorXd>& x) const;

private:
    Eigen::VectorXd weights_;
    std::vector<Eigen::VectorXd> means_;
    std::vector<Eigen::MatrixXd> cholesky_;
    Eigen::VectorXd log_normalizer_;
    double nll_floor_ = 0.0;
};

/// Single standard-normal component in `dim` dimensions. Useful as a neutral
/// prior when no fitted mixture is available.
GmmPrior standard_normal_prior(int dim);

/// Fits a full-covariance mixture to row-wise samples by EM, seeded by
/// deterministic k-means++ style picks. A ridge keeps covariances positive
/// definite.
GmmPrior fit_gmm_em(const Eigen::MatrixXd& samples, int components, int iterations, unsigned seed,
                    double ridge = 1e-4);

} // namespace pose_ba
