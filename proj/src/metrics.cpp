#include "pose_ba/metrics.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <string>

namespace pose_ba {

namespace {

constexpr double kMillimetersPerMeter = 1000.0;

void require_same_shape(const Joints3& a, const Joints3& b, const char* what)
{
    if (a.rows() != b.rows()) {
        throw ValidationError(std::string(what) + ": joint counts differ (" + std::to_string(a.rows()) + " vs " +
                              std::to_string(b.rows()) + ")");
    }
    if (a.rows() == 0) {
        throw ValidationError(std::string(what) + ": no joints");
    }
}

} // namespace

Joints3 SimilarityTransform::apply(const Joints3& points) const
{
    Joints3 out = (scale * (points * rotation.transpose())).rowwise() + translation.transpose();
    return out;
}

double mean_joint_distance(const Joints3& pred, const Joints3& gt)
{
    require_same_shape(pred, gt, "mean_joint_distance");
    return kMillimetersPerMeter * (pred - gt).rowwise().norm().mean();
}

double mpjpe(const Joints3& pred, const Joints3& gt)
{
    require_same_shape(pred, gt, "mpjpe");
    const Joints3 p = pred.rowwise() - pred.row(0);
    const Joints3 g = gt.rowwise() - gt.row(0);
    return kMillimetersPerMeter * (p - g).rowwise().norm().mean();
}

ProcrustesResult procrustes_align(const Joints3& pred, const Joints3& gt, bool allow_scale)
{
    require_same_shape(pred, gt, "procrustes_align");
    if (pred.rows() < 3) {
        throw ValidationError("procrustes_align: at least three points are required");
    }
    const Eigen::RowVector3d mu_p = pred.colwise().mean();
    const Eigen::RowVector3d mu_g = gt.colwise().mean();
    const Joints3 p = pred.rowwise() - mu_p;
    const Joints3 g = gt.rowwise() - mu_g;

    // Collinear or coincident clouds leave the rotation undetermined.
    Eigen::JacobiSVD<Eigen::MatrixXd> shape_svd(p);
    const auto sv = shape_svd.singularValues();
    if (sv[0] <= 0.0 || sv[1] <= 1e-9 * sv[0]) {
        throw ValidationError("procrustes_align: prediction is degenerate (collinear or coincident)");
    }

    const Mat3 cov = g.transpose() * p; // sum g_i p_i^T
    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 d = Mat3::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
        d(2, 2) = -1.0;
    }
    ProcrustesResult result;
    auto& tf = result.transform;
    tf.rotation = svd.matrixU() * d * svd.matrixV().transpose();
    tf.scale = allow_scale ? (svd.singularValues().asDiagonal() * d).trace() / p.squaredNorm() : 1.0;
    tf.translation = mu_g.transpose() - tf.scale * tf.rotation * mu_p.transpose();
    result.aligned = tf.apply(pred);
    return result;
}

double pa_mpjpe(const Joints3& pred, const Joints3& gt, bool allow_scale)
{
    return mean_joint_distance(procrustes_align(pred, gt, allow_scale).aligned, gt);
}

} // namespace pose_ba
