#pragma once

// Per-frame building blocks shared by the serial reference and the parallel
// evaluator. Every function returns its energy contribution already scaled by
// the relevant lambda and, when given an output pointer, accumulates the
// matching gradient.

#include "pose_ba/energy.hpp"

namespace pose_ba::detail {

/// rho(|r|); writes d rho / d r into grad when non-null.
template <int N>
double huber_norm(const Eigen::Matrix<double, N, 1>& r, double delta, Eigen::Matrix<double, N, 1>* grad)
{
    const double n = r.norm();
    if (n <= delta) {
        if (grad) {
            *grad = r;
        }
        return 0.5 * n * n;
    }
    if (grad) {
        *grad = (delta / n) * r;
    }
    return delta * (n - 0.5 * delta);
}

/// h(r) = 0 for |r| <= margin, rho(|r| - margin) otherwise.
inline double hinge_norm(const Vec2& r, double margin, double delta, Vec2* grad)
{
    const double n = r.norm();
    if (n <= margin) {
        if (grad) {
            grad->setZero();
        }
        return 0.0;
    }
    const double excess = n - margin;
    if (grad) {
        const double slope = excess <= delta ? excess : delta;
        *grad = (slope / n) * r;
    }
    return excess <= delta ? 0.5 * excess * excess : delta * (excess - 0.5 * delta);
}

/// sum_i w_i loss(x_i - det_i) for one person, unscaled. The loss is the
/// hinge in robust mode and Huber otherwise. Gradient written (not added).
double person_reprojection(const Joints2& x, const Detection& det, const EnergyConfig& config, bool use_hinge,
                           Joints2* grad);

/// lambda_R-scaled reprojection contribution of one frame, selecting the
/// single-person or robust multi-person form from the config.
double frame_reprojection(const Joints2& x, const FrameDetections& frame, const EnergyConfig& config,
                          Joints2* grad_x);

/// lambda_I-scaled initialisation prior of one frame (clamped at tau_I in
/// robust mode).
double frame_init_prior(const Joints3& joints, const Joints3& init_joints, const Shape& beta,
                        const Shape& init_beta, const EnergyConfig& config, Joints3* grad_joints,
                        Shape* grad_beta);

/// lambda_J-scaled joint-angle prior of one frame. Gradient added to the
/// non-root entries of grad_theta.
double frame_joint_prior(const Pose& theta, const GmmPrior& prior, const EnergyConfig& config,
                         Eigen::VectorXd* grad_theta);

/// Temporal energy between frames t-1 and t. The term depends only on
/// differences, so the gradient with respect to frame t-1 is the negation of
/// the one written here for frame t. grad_camera holds (d/ds, d/du).
struct PairGradient {
    Joints3 joints;
    Joints2 projections;
    Vec3 camera;
};

double pair_temporal(const Joints3& prev_joints, const Joints3& joints, const Joints2& prev_x, const Joints2& x,
                     const CameraParams& prev_camera, const CameraParams& camera, const EnergyConfig& config,
                     PairGradient* grad);

/// Chain rule through x = s * X.xy + u: adds into grad_joints and
/// grad_camera (d/ds, d/du).
void pull_back_projection(const Joints3& joints, const CameraParams& camera, const Joints2& grad_x,
                          Joints3& grad_joints, Vec3& grad_camera);

} // namespace pose_ba::detail
