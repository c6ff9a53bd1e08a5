#include "pose_ba/body_model.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace pose_ba {

namespace {

Mat3 skew(const Vec3& v)
{
    Mat3 k;
    k << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return k;
}

// R = I + a*K + b*K^2 with K = [v]x, a = sin(t)/t, b = (1 - cos t)/t^2.
// c = (da/dt)/t and d = (db/dt)/t give the derivative of the coefficients
// with respect to v_k as c*v_k and d*v_k.
struct RodriguesCoefficients {
    double a, b, c, d;
};

RodriguesCoefficients coefficients(double t2)
{
    constexpr double kSeriesThreshold = 1e-6; // on t^2
    if (t2 < kSeriesThreshold) {
        const double t4 = t2 * t2;
        return {1.0 - t2 / 6.0 + t4 / 120.0,
                0.5 - t2 / 24.0 + t4 / 720.0,
                -1.0 / 3.0 + t2 / 30.0 - t4 / 840.0,
                -1.0 / 12.0 + t2 / 180.0 - t4 / 6720.0};
    }
    const double t = std::sqrt(t2);
    const double s = std::sin(t);
    const double c = std::cos(t);
    return {s / t,
            (1.0 - c) / t2,
            (t * c - s) / (t2 * t),
            (t * s - 2.0 * (1.0 - c)) / (t2 * t2)};
}

void validate_model(const std::vector<int>& parents, const Joints3& rest_offsets,
                    const std::vector<ShapeBasis>& shape_basis)
{
    const auto joints = static_cast<Eigen::Index>(parents.size());
    if (joints < 1) {
        throw ValidationError("body model: at least one joint is required");
    }
    if (rest_offsets.rows() != joints) {
        throw ValidationError("body model: rest_offsets has " + std::to_string(rest_offsets.rows()) +
                              " rows, expected " + std::to_string(joints));
    }
    if (static_cast<Eigen::Index>(shape_basis.size()) != joints) {
        throw ValidationError("body model: shape_basis has " + std::to_string(shape_basis.size()) +
                              " joints, expected " + std::to_string(joints));
    }
    if (parents[0] != -1) {
        throw ValidationError("body model: joint 0 must be the root (parent -1)");
    }
    for (std::size_t i = 1; i < parents.size(); ++i) {
        if (parents[i] < 0 || parents[i] >= static_cast<int>(i)) {
            throw ValidationError("body model: joint " + std::to_string(i) +
                                  " must have a parent with a smaller index");
        }
        if (rest_offsets.row(static_cast<Eigen::Index>(i)).norm() <= 0.0) {
            throw ValidationError("body model: joint " + std::to_string(i) + " has a zero rest offset");
        }
    }
    if (!rest_offsets.allFinite()) {
        throw ValidationError("body model: non-finite rest offset");
    }
    for (const auto& basis : shape_basis) {
        if (!basis.allFinite()) {
            throw ValidationError("body model: non-finite shape basis");
        }
    }
}

} // namespace

BodyModel::BodyModel(std::vector<int> parents, Joints3 rest_offsets, std::vector<ShapeBasis> shape_basis)
    : parents_(std::move(parents)), rest_offsets_(std::move(rest_offsets)), shape_basis_(std::move(shape_basis))
{
    validate_model(parents_, rest_offsets_, shape_basis_);
}

BodyModel default_body_model()
{
    // SMPL joint ordering. Y is up, the body faces +Z, left is +X.
    std::vector<int> parents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};
    Joints3 offsets(24, 3);
    offsets << 0.00, 0.00, 0.00,   // pelvis
               0.09, -0.08, 0.00,  // left hip
               -0.09, -0.08, 0.00, // right hip
               0.00, 0.11, -0.01,  // spine 1
               0.01, -0.38, 0.01,  // left knee
               -0.01, -0.38, 0.01, // right knee
               0.00, 0.13, 0.01,   // spine 2
               0.00, -0.40, -0.03, // left ankle
               0.00, -0.40, -0.03, // right ankle
               0.00, 0.06, 0.01,   // spine 3
               0.01, -0.06, 0.12,  // left foot
               -0.01, -0.06, 0.12, // right foot
               0.00, 0.21, -0.02,  // neck
               0.07, 0.12, -0.01,  // left collar
               -0.07, 0.12, -0.01, // right collar
               0.00, 0.09, 0.05,   // head
               0.12, 0.04, -0.01,  // left shoulder
               -0.12, 0.04, -0.01, // right shoulder
               0.26, 0.00, -0.02,  // left elbow
               -0.26, 0.00, -0.02, // right elbow
               0.25, 0.01, 0.00,   // left wrist
               -0.25, 0.01, 0.00,  // right wrist
               0.08, -0.01, 0.00,  // left hand
               -0.08, -0.01, 0.00; // right hand

    // Each basis column rescales bone offsets along their own direction. Per
    // bone the absolute coefficients sum to < 1/3, so any beta in [-3, 3]^10
    // keeps every bone length positive.
    enum Group { kTorso, kLeg, kArm, kHead, kWidth };
    const std::array<Group, 24> group = {kTorso, kWidth, kWidth, kTorso, kLeg, kLeg, kTorso, kLeg,
                                         kLeg,   kTorso, kLeg,   kLeg,   kHead, kWidth, kWidth, kHead,
                                         kArm,   kArm,   kArm,   kArm,   kArm, kArm,   kArm,   kArm};
    std::vector<ShapeBasis> basis(24, ShapeBasis::Zero());
    for (int i = 1; i < 24; ++i) {
        const Vec3 offset = offsets.row(i).transpose();
        Eigen::Matrix<double, 1, kShapeDim> coeff = Eigen::Matrix<double, 1, kShapeDim>::Zero();
        coeff[0] = 0.05;
        coeff[1 + group[static_cast<std::size_t>(i)]] = 0.04;
        // left/right asymmetry
        coeff[6] = offset.x() > 0.0 ? 0.02 : (offset.x() < 0.0 ? -0.02 : 0.0);
        // small fixed per-bone perturbations
        for (int k = 7; k < kShapeDim; ++k) {
            coeff[k] = 0.02 * std::sin(1.7 * i + 2.3 * k);
        }
        basis[static_cast<std::size_t>(i)] = offset * coeff;
    }
    return BodyModel(std::move(parents), std::move(offsets), std::move(basis));
}

Mat3 rodrigues(const Vec3& axis_angle)
{
    const auto co = coefficients(axis_angle.squaredNorm());
    const Mat3 k = skew(axis_angle);
    return Mat3::Identity() + co.a * k + co.b * (k * k);
}

Mat3 rodrigues(const Vec3& axis_angle, std::array<Mat3, 3>& jacobian)
{
    const auto co = coefficients(axis_angle.squaredNorm());
    const Mat3 k = skew(axis_angle);
    const Mat3 k2 = k * k;
    for (int i = 0; i < 3; ++i) {
        const Mat3 e = skew(Vec3::Unit(i));
        const double vi = axis_angle[i];
        jacobian[static_cast<std::size_t>(i)] =
            (co.c * vi) * k + co.a * e + (co.d * vi) * k2 + co.b * (e * k + k * e);
    }
    return Mat3::Identity() + co.a * k + co.b * k2;
}

Vec3 canonicalize_axis_angle(const Vec3& axis_angle)
{
    constexpr double kTwoPi = 2.0 * std::numbers::pi;
    const double angle = axis_angle.norm();
    if (angle < kTwoPi) {
        return axis_angle;
    }
    const double wrapped = std::fmod(angle, kTwoPi);
    return axis_angle * (wrapped / angle);
}

Pose canonicalize_pose(const Pose& theta)
{
    Pose out = theta;
    for (Eigen::Index j = 0; j + 2 < out.size(); j += 3) {
        out.segment<3>(j) = canonicalize_axis_angle(theta.segment<3>(j));
    }
    return out;
}

Joints3 bone_offsets(const BodyModel& model, const Shape& beta)
{
    Joints3 offsets = model.rest_offsets();
    for (int i = 0; i < model.joint_count(); ++i) {
        offsets.row(i) += (model.shape_basis(i) * beta).transpose();
    }
    return offsets;
}

void forward_kinematics(const BodyModel& model, const Shape& beta, const Eigen::Ref<const Pose>& theta,
                        KinematicState& state)
{
    const int joints = model.joint_count();
    if (theta.size() != model.pose_dim()) {
        throw ValidationError("forward_kinematics: pose has " + std::to_string(theta.size()) +
                              " entries, expected " + std::to_string(model.pose_dim()));
    }
    const auto n = static_cast<std::size_t>(joints);
    state.offsets = bone_offsets(model, beta);
    state.positions.resize(joints, 3);
    state.local.resize(n);
    state.global.resize(n);
    state.local_jacobian.resize(n);

    state.local[0] = rodrigues(theta.segment<3>(0), state.local_jacobian[0]);
    state.global[0] = state.local[0];
    state.positions.row(0).setZero();
    for (int i = 1; i < joints; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const auto p = static_cast<std::size_t>(model.parent(i));
        state.local[ui] = rodrigues(theta.segment<3>(3 * i), state.local_jacobian[ui]);
        state.global[ui] = state.global[p] * state.local[ui];
        state.positions.row(i) =
            state.positions.row(model.parent(i)) + (state.global[p] * state.offsets.row(i).transpose()).transpose();
    }
}

Joints3 forward_kinematics(const BodyModel& model, const Shape& beta, const Eigen::Ref<const Pose>& theta)
{
    KinematicState state;
    forward_kinematics(model, beta, theta, state);
    return state.positions;
}

void backpropagate(const BodyModel& model, const KinematicState& state, const Joints3& grad_positions,
                   Eigen::Ref<Eigen::VectorXd> grad_theta, Shape& grad_beta)
{
    const int joints = model.joint_count();
    Joints3 grad_x = grad_positions;
    std::vector<Mat3> grad_global(static_cast<std::size_t>(joints), Mat3::Zero());

    auto accumulate_local = [&](int joint, const Mat3& grad_local) {
        const auto& jac = state.local_jacobian[static_cast<std::size_t>(joint)];
        for (int k = 0; k < 3; ++k) {
            grad_theta[3 * joint + k] += grad_local.cwiseProduct(jac[static_cast<std::size_t>(k)]).sum();
        }
    };

    // Children have larger indices than their parents, so each joint's
    // adjoints are complete by the time it is visited.
    for (int i = joints - 1; i >= 1; --i) {
        const auto ui = static_cast<std::size_t>(i);
        const int p = model.parent(i);
        const auto up = static_cast<std::size_t>(p);
        const Vec3 gx = grad_x.row(i).transpose();
        const Mat3& parent_rot = state.global[up];

        grad_x.row(p) += gx.transpose();
        grad_global[up] += gx * state.offsets.row(i) + grad_global[ui] * state.local[ui].transpose();
        grad_beta += model.shape_basis(i).transpose() * (parent_rot.transpose() * gx);
        accumulate_local(i, parent_rot.transpose() * grad_global[ui]);
    }
    accumulate_local(0, grad_global[0]);
}

Joints2 project(const Joints3& joints, const CameraParams& camera)
{
    Joints2 out(joints.rows(), 2);
    for (Eigen::Index i = 0; i < joints.rows(); ++i) {
        out(i, 0) = camera.scale * joints(i, 0) + camera.translation.x();
        out(i, 1) = camera.scale * joints(i, 1) + camera.translation.y();
    }
    return out;
}

} // namespace pose_ba
