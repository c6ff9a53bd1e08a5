#pragma once

#include <Eigen/Core>

#include <stdexcept>

namespace pose_ba {

inline constexpr int kShapeDim = 10;
inline constexpr int kDefaultJointCount = 24;

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Shape = Eigen::Matrix<double, kShapeDim, 1>;
using Pose = Eigen::VectorXd;
using Joints3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Joints2 = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

/// Input violating a documented contract: wrong dimensions, malformed files,
/// out-of-range configuration values.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The optimiser could not produce a usable result.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Orthographic camera: pixel = scale * (X.x, X.y) + translation.
struct CameraParams {
    double scale = 1.0;
    Vec2 translation = Vec2::Zero();

    friend bool operator==(const CameraParams& a, const CameraParams& b)
    {
        return a.scale == b.scale && a.translation == b.translation;
    }
};

} // namespace pose_ba
