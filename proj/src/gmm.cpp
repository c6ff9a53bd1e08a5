#include "pose_ba/gmm.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

namespace pose_ba {

namespace {

double log_sum_exp(const Eigen::VectorXd& v)
{
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) {
        return m;
    }
    return m + std::log((v.array() - m).exp().sum());
}

} // namespace

GmmPrior::GmmPrior(Eigen::VectorXd weights, std::vector<Eigen::VectorXd> means, std::vector<Eigen::MatrixXd> cholesky)
    : weights_(std::move(weights)), means_(std::move(means)), cholesky_(std::move(cholesky))
{
    const auto k = weights_.size();
    if (k < 1) {
        throw ValidationError("gmm prior: at least one component is required");
    }
    if (static_cast<Eigen::Index>(means_.size()) != k || static_cast<Eigen::Index>(cholesky_.size()) != k) {
        throw ValidationError("gmm prior: weights, means and covariances_cholesky must have equal length");
    }
    if ((weights_.array() <= 0.0).any() || !weights_.allFinite()) {
        throw ValidationError("gmm prior: weights must be positive");
    }
    if (std::abs(weights_.sum() - 1.0) > 1e-9) {
        throw ValidationError("gmm prior: weights must sum to 1");
    }
    const auto d = means_.front().size();
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    log_normalizer_.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        const auto& mu = means_[static_cast<std::size_t>(i)];
        auto& l = cholesky_[static_cast<std::size_t>(i)];
        if (mu.size() != d || l.rows() != d || l.cols() != d) {
            throw ValidationError("gmm prior: component " + std::to_string(i) + " has inconsistent dimensions");
        }
        if (!mu.allFinite() || !l.allFinite()) {
            throw ValidationError("gmm prior: component " + std::to_string(i) + " is not finite");
        }
        if ((l.diagonal().array() <= 0.0).any()) {
            throw ValidationError("gmm prior: covariance " + std::to_string(i) + " is not positive definite");
        }
        l = l.triangularView<Eigen::Lower>();
        log_normalizer_[i] = std::log(weights_[i]) - l.diagonal().array().log().sum() -
                             static_cast<double>(d) * half_log_2pi;
    }
    const double top = log_normalizer_.maxCoeff();
    nll_floor_ = -(top + std::log((log_normalizer_.array() - top).exp().sum()));
}

Eigen::VectorXd GmmPrior::component_log_densities(const Eigen::Ref<const Eigen::VectorXd>& x) const
{
    Eigen::VectorXd out(components());
    for (int i = 0; i < components(); ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const Eigen::VectorXd z = cholesky_[ui].triangularView<Eigen::Lower>().solve(x - means_[ui]);
        out[i] = log_normalizer_[i] - 0.5 * z.squaredNorm();
    }
    return out;
}

double GmmPrior::negative_log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& x) const
{
    if (x.size() != dim()) {
        throw ValidationError("gmm prior: expected " + std::to_string(dim()) + " angles, got " +
                              std::to_string(x.size()));
    }
    return -log_sum_exp(component_log_densities(x));
}

double GmmPrior::negative_log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& x,
                                         Eigen::Ref<Eigen::VectorXd> grad) const
{
    if (x.size() != dim()) {
        throw ValidationError("gmm prior: expected " + std::to_string(dim()) + " angles, got " +
                              std::to_string(x.size()));
    }
    const int k = components();
    Eigen::VectorXd log_p(k);
    std::vector<Eigen::VectorXd> whitened(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        whitened[ui] = cholesky_[ui].triangularView<Eigen::Lower>().solve(x - means_[ui]);
        log_p[i] = log_normalizer_[i] - 0.5 * whitened[ui].squaredNorm();
    }
    const double lse = log_sum_exp(log_p);
    grad.setZero();
    for (int i = 0; i < k; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const double responsibility = std::exp(log_p[i] - lse);
        if (responsibility == 0.0) {
            continue;
        }
        // Sigma^-1 (x - mu) = L^-T z
        grad += responsibility * cholesky_[ui].triangularView<Eigen::Lower>().transpose().solve(whitened[ui]);
    }
    return -lse;
}

GmmPrior standard_normal_prior(int dim)
{
    return GmmPrior(Eigen::VectorXd::Ones(1), {Eigen::VectorXd::Zero(dim)}, {Eigen::MatrixXd::Identity(dim, dim)});
}

GmmPrior fit_gmm_em(const Eigen::MatrixXd& samples, int components, int iterations, unsigned seed, double ridge)
{
    const auto n = samples.rows();
    const auto d = samples.cols();
    if (n < components || components < 1) {
        throw ValidationError("fit_gmm_em: need at least as many samples as components");
    }
    std::mt19937_64 rng(seed);

    // k-means++ seeding of the means
    std::vector<Eigen::VectorXd> means;
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    means.emplace_back(samples.row(pick(rng)).transpose());
    Eigen::VectorXd nearest = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    while (static_cast<int>(means.size()) < components) {
        for (Eigen::Index s = 0; s < n; ++s) {
            nearest[s] = std::min(nearest[s], (samples.row(s).transpose() - means.back()).squaredNorm());
        }
        std::discrete_distribution<Eigen::Index> weighted(nearest.data(), nearest.data() + n);
        means.emplace_back(samples.row(weighted(rng)).transpose());
    }

    const Eigen::VectorXd mean_all = samples.colwise().mean().transpose();
    const Eigen::MatrixXd centered_all = samples.rowwise() - mean_all.transpose();
    const Eigen::MatrixXd cov_all =
        (centered_all.transpose() * centered_all) / static_cast<double>(n) + ridge * Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd chol_all = Eigen::LLT<Eigen::MatrixXd>(cov_all).matrixL();

    Eigen::VectorXd weights = Eigen::VectorXd::Constant(components, 1.0 / components);
    std::vector<Eigen::MatrixXd> chol(static_cast<std::size_t>(components), chol_all);
    Eigen::MatrixXd resp(n, components);

    for (int it = 0; it < iterations; ++it) {
        const GmmPrior current(weights, means, chol);
        for (Eigen::Index s = 0; s < n; ++s) {
            const Eigen::VectorXd lp = current.component_log_densities(samples.row(s).transpose());
            resp.row(s) = (lp.array() - log_sum_exp(lp)).exp().transpose();
        }
        for (int k = 0; k < components; ++k) {
            const auto uk = static_cast<std::size_t>(k);
            const double nk = resp.col(k).sum();
            if (nk < 1e-8) {
                continue; // empty component keeps its previous parameters
            }
            weights[k] = nk / static_cast<double>(n);
            means[uk] = (samples.transpose() * resp.col(k)) / nk;
            const Eigen::MatrixXd centered = samples.rowwise() - means[uk].transpose();
            const Eigen::MatrixXd cov = (centered.transpose() * resp.col(k).asDiagonal() * centered) / nk +
                                        ridge * Eigen::MatrixXd::Identity(d, d);
            chol[uk] = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
        }
        weights /= weights.sum();
    }
    return GmmPrior(weights, means, chol);
}

} // namespace pose_ba
