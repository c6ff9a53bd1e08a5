#pragma once

#include "pose_ba/types.hpp"

#include <array>
#include <vector>

namespace pose_ba {

using ShapeBasis = Eigen::Matrix<double, 3, kShapeDim>;

/// Articulated kinematic tree with linear, shape-dependent bone offsets.
///
/// Joint 0 is the root (pelvis) and sits at the origin. Every other joint is
/// placed at its parent's position plus the parent's accumulated rotation
/// applied to the joint's shaped bone offset. Joints are stored in
/// topological order: parent(i) < i.
class BodyModel {
public:
    BodyModel(std::vector<int> parents, Joints3 rest_offsets, std::vector<ShapeBasis> shape_basis);

    int joint_count() const { return static_cast<int>(parents_.size()); }
    int pose_dim() const { return 3 * joint_count(); }
    int parent(int joint) const { return parents_[static_cast<std::size_t>(joint)]; }
    const std::vector<int>& parents() const { return parents_; }
    const Joints3& rest_offsets() const { return rest_offsets_; }
    const ShapeBasis& shape_basis(int joint) const { return shape_basis_[static_cast<std::size_t>(joint)]; }
    const std::vector<ShapeBasis>& shape_basis() const { return shape_basis_; }

private:
    std::vector<int> parents_;
    Joints3 rest_offsets_;
    std::vector<ShapeBasis> shape_basis_;
};

/// The 24-joint humanoid tree shipped in data/body24.json.
BodyModel default_body_model();

/// Rotation matrix of an axis-angle vector. The zero vector maps to identity.
Mat3 rodrigues(const Vec3& axis_angle);

/// Rotation matrix plus its partial derivatives with respect to the three
/// axis-angle components. Well defined at (and near) the zero vector.
Mat3 rodrigues(const Vec3& axis_angle, std::array<Mat3, 3>& jacobian);

/// Wraps the rotation angle into [0, 2*pi) keeping the axis.
Vec3 canonicalize_axis_angle(const Vec3& axis_angle);

/// Applies canonicalize_axis_angle to every joint of a pose vector.
Pose canonicalize_pose(const Pose& theta);

/// Shaped bone offsets: rest_offsets[i] + shape_basis[i] * beta.
Joints3 bone_offsets(const BodyModel& model, const Shape& beta);

/// Intermediate quantities of one forward-kinematics pass, kept so the
/// gradient can be pulled back without recomputation.
struct KinematicState {
    Joints3 offsets;
    Joints3 positions;
    std::vector<Mat3> local;
    std::vector<Mat3> global;
    std::vector<std::array<Mat3, 3>> local_jacobian;
};

void forward_kinematics(const BodyModel& model, const Shape& beta, const Eigen::Ref<const Pose>& theta,
                        KinematicState& state);

/// Joint positions (meters, root at the origin).
Joints3 forward_kinematics(const BodyModel& model, const Shape& beta, const Eigen::Ref<const Pose>& theta);

/// Reverse-mode pass through the kinematic tree. Given dE/dX for every joint,
/// accumulates dE/dtheta into grad_theta and dE/dbeta into grad_beta.
void backpropagate(const BodyModel& model, const KinematicState& state, const Joints3& grad_positions,
                   Eigen::Ref<Eigen::VectorXd> grad_theta, Shape& grad_beta);

/// Orthographic projection of every joint; depth is discarded.
Joints2 project(const Joints3& joints, const CameraParams& camera);

} // namespace pose_ba
