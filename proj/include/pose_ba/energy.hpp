#pragma once

#include "pose_ba/body_model.hpp"
#include "pose_ba/gmm.hpp"
#include "pose_ba/types.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace pose_ba {

inline constexpr std::size_t kMaxPeoplePerFrame = 6;

/// 2D keypoints of one detected person. A zero confidence marks a missing
/// joint and removes it from every reprojection sum.
struct Detection {
    Joints2 keypoints;
    Eigen::VectorXd confidence;
};

struct FrameDetections {
    std::vector<Detection> people;
};

/// Per-frame initial estimates the solution is pulled towards. joints[t] is
/// forward_kinematics(betas[t], thetas[t]).
struct InitialEstimate {
    std::vector<Shape> betas;
    std::vector<Pose> thetas;
    std::vector<CameraParams> cameras;
    std::vector<Joints3> joints;

    int frame_count() const { return static_cast<int>(thetas.size()); }
};

/// Builds an InitialEstimate, deriving joints by forward kinematics.
InitialEstimate make_initial_estimate(const BodyModel& model, std::vector<Shape> betas, std::vector<Pose> thetas,
                                      std::vector<CameraParams> cameras);

/// Weights, thresholds and loss switches of the bundle-adjustment energy.
/// The defaults are the Human3.6M column of the published hyperparameters.
struct EnergyConfig {
    double lambda_R = 1e-3;
    double lambda_I = 10.0;
    double lambda_beta = 0.2;
    double lambda_J = 1e-4;
    double lambda_1 = 5.0;
    double lambda_2 = 1e-4;
    double lambda_3 = 2.0;
    double tau_R = 50.0;
    double tau_I = 2e-2;
    double huber_delta = 1.0;
    double hinge_margin = 5.0;
    bool robust_mode = false;
    double camera_translation_bound_fraction = 0.10;
    bool penalize_camera_scale = true;
    double image_width = 0.0;

    static EnergyConfig h36m();
    static EnergyConfig kinetics();

    /// Keeps only the listed term groups: 'R' reprojection, 'P' priors
    /// (joint-angle and initialisation), 'T' temporal. Others get zero weight.
    EnergyConfig with_terms(std::string_view terms) const;

    void validate() const;
};

/// The optimisation variables: one shared shape, per-frame pose and camera.
struct SequenceSolution {
    Shape beta = Shape::Zero();
    std::vector<Pose> thetas;
    std::vector<CameraParams> cameras;

    int frame_count() const { return static_cast<int>(thetas.size()); }
};

/// Everything the energy depends on apart from the solution itself.
struct SequenceProblem {
    BodyModel model;
    GmmPrior prior;
    EnergyConfig config;
    std::vector<FrameDetections> frames;
    InitialEstimate init;

    int frame_count() const { return static_cast<int>(frames.size()); }

    /// Throws ValidationError on inconsistent frame counts or dimensions.
    void validate() const;
};

// Losses. All act on the Euclidean norm of a residual vector.

/// 0.5 r^2 for r <= delta, delta (r - delta / 2) beyond.
double huber(double r, double delta);
double huber(const Eigen::Ref<const Eigen::VectorXd>& residual, double delta);

/// Zero inside the margin, Huber of the excess beyond it.
double hinge(double r, double margin, double delta);
double hinge(const Vec2& residual, double margin, double delta);

// Individual terms. These evaluate serially and serve as the reference the
// parallel evaluator is tested against.

/// lambda_R sum_t sum_i w_i rho(x_i - x_det,i), at most one person per frame.
/// Frames without a detection contribute nothing.
double reprojection_energy(const BodyModel& model, const SequenceSolution& solution,
                           std::span<const FrameDetections> frames, const EnergyConfig& config);

/// lambda_R sum_t min(min_p sum_i w_i h(x_i - x_det,i^p), tau_R).
double robust_reprojection_energy(const BodyModel& model, const SequenceSolution& solution,
                                  std::span<const FrameDetections> frames, const EnergyConfig& config);

double temporal_energy(const BodyModel& model, const SequenceSolution& solution, const EnergyConfig& config);

/// Unweighted negative log-likelihood of the non-root joint angles, shifted
/// by the mixture's nll_floor so that it is never negative.
double joint_angle_prior(const Pose& theta, const GmmPrior& prior);

double init_prior(const BodyModel& model, const SequenceSolution& solution, const InitialEstimate& init,
                  const EnergyConfig& config);

struct EnergyBreakdown {
    double reprojection = 0.0;
    double temporal = 0.0;
    double joint_prior = 0.0; // already scaled by lambda_J
    double init_prior = 0.0;  // already scaled by lambda_I

    double total() const { return reprojection + temporal + joint_prior + init_prior; }
};

EnergyBreakdown energy_terms(const SequenceProblem& problem, const SequenceSolution& solution);

double total_energy(const SequenceProblem& problem, const SequenceSolution& solution);

/// total / max(1e-6, 3D trajectory length). Requires at least two frames.
double normalized_energy(const BodyModel& model, const SequenceSolution& solution, double total);

/// Sum over frames and joints of |X_i^t - X_i^{t-1}| in meters.
double trajectory_length(const BodyModel& model, const SequenceSolution& solution);

/// Gradient of total_energy with respect to the packed parameter vector
/// (see packing.hpp for the layout; the scale slot holds log(s)).
Eigen::VectorXd energy_gradient(const SequenceProblem& problem, const SequenceSolution& solution);

namespace reference {

/// Straight serial evaluation of energy and packed gradient. Kept as the
/// baseline for the parallel evaluator and for benchmarks.
double energy_and_gradient(const SequenceProblem& problem, const Eigen::Ref<const Eigen::VectorXd>& packed,
                           Eigen::Ref<Eigen::VectorXd> grad);

} // namespace reference

/// Fused per-frame evaluation of energy and gradient, parallel over frames.
///
/// Per-frame partial results are combined in frame order, so the value and
/// gradient are bit-identical for any thread count. Holds scratch buffers; a
/// single instance must not be shared between concurrent callers.
class EnergyEvaluator {
public:
    explicit EnergyEvaluator(const SequenceProblem& problem);
    ~EnergyEvaluator();
    EnergyEvaluator(const EnergyEvaluator&) = delete;
    EnergyEvaluator& operator=(const EnergyEvaluator&) = delete;

    double operator()(const Eigen::Ref<const Eigen::VectorXd>& packed, Eigen::Ref<Eigen::VectorXd> grad);
    double value(const Eigen::Ref<const Eigen::VectorXd>& packed);

    const SequenceProblem& problem() const { return problem_; }

private:
    struct FrameScratch;

    double evaluate(const Eigen::Ref<const Eigen::VectorXd>& packed, Eigen::VectorXd* grad);

    const SequenceProblem& problem_;
    std::vector<FrameScratch> frames_;
};

/// Sets the worker count used by the parallel kernels (OpenMP). Values < 1
/// leave the runtime default.
void set_thread_count(int threads);
int thread_count();

} // namespace pose_ba
