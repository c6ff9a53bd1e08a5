#pragma once

#include "pose_ba/types.hpp"

namespace pose_ba {

/// x -> scale * rotation * x + translation
struct SimilarityTransform {
    Mat3 rotation = Mat3::Identity();
    double scale = 1.0;
    Vec3 translation = Vec3::Zero();

    Joints3 apply(const Joints3& points) const;
};

struct ProcrustesResult {
    SimilarityTransform transform;
    Joints3 aligned;
};

/// Mean per-joint position error in millimetres after translating both
/// clouds so joint 0 (pelvis) is at the origin. Inputs are in meters.
double mpjpe(const Joints3& pred, const Joints3& gt);

/// Mean Euclidean distance in millimetres, no centering.
double mean_joint_distance(const Joints3& pred, const Joints3& gt);

/// Similarity (or rigid, with allow_scale = false) transform minimising
/// sum |s R pred_i + t - gt_i|^2, solved in closed form from the SVD of the
/// cross-covariance with a reflection fix so det R = +1.
/// Throws ValidationError for fewer than three points or collinear clouds.
ProcrustesResult procrustes_align(const Joints3& pred, const Joints3& gt, bool allow_scale = true);

/// mean_joint_distance(procrustes_align(pred, gt).aligned, gt) in mm.
double pa_mpjpe(const Joints3& pred, const Joints3& gt, bool allow_scale = true);

} // namespace pose_ba
