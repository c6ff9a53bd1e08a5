#include "pose_ba/packing.hpp"

#include <cmath>
#include <string>

namespace pose_ba {

Eigen::VectorXd pack(const SequenceSolution& solution)
{
    const int frames = solution.frame_count();
    if (frames < 1 || static_cast<int>(solution.cameras.size()) != frames) {
        throw ValidationError("pack: solution needs at least one frame and one camera per frame");
    }
    const auto pose_dim = solution.thetas.front().size();
    if (pose_dim % 3 != 0) {
        throw ValidationError("pack: pose dimension must be a multiple of 3");
    }
    const int joints = static_cast<int>(pose_dim / 3);
    Eigen::VectorXd out(packed_size(frames, joints));
    out.head<kShapeDim>() = solution.beta;
    for (int t = 0; t < frames; ++t) {
        const auto ut = static_cast<std::size_t>(t);
        const auto& theta = solution.thetas[ut];
        const auto& cam = solution.cameras[ut];
        if (theta.size() != pose_dim) {
            throw ValidationError("pack: frame " + std::to_string(t) + " has a pose of different size");
        }
        if (!(cam.scale > 0.0)) {
            throw ValidationError("pack: frame " + std::to_string(t) + " has a non-positive camera scale");
        }
        const auto off = frame_offset(t, joints);
        out.segment(off, pose_dim) = theta;
        out[off + pose_dim] = std::log(cam.scale);
        out.segment<2>(off + pose_dim + 1) = cam.translation;
    }
    return out;
}

SequenceSolution unpack(const Eigen::Ref<const Eigen::VectorXd>& packed, int frames, int joints)
{
    if (frames < 1 || packed.size() != packed_size(frames, joints)) {
        throw ValidationError("unpack: packed length " + std::to_string(packed.size()) + " does not match " +
                              std::to_string(frames) + " frames");
    }
    const int pose_dim = 3 * joints;
    SequenceSolution out;
    out.beta = packed.head<kShapeDim>();
    out.thetas.reserve(static_cast<std::size_t>(frames));
    out.cameras.reserve(static_cast<std::size_t>(frames));
    for (int t = 0; t < frames; ++t) {
        const auto off = frame_offset(t, joints);
        out.thetas.emplace_back(packed.segment(off, pose_dim));
        CameraParams cam;
        cam.scale = std::exp(packed[off + pose_dim]);
        cam.translation = packed.segment<2>(off + pose_dim + 1);
        out.cameras.push_back(cam);
    }
    return out;
}

int packed_frame_count(Eigen::Index size, int joints)
{
    const auto block = frame_block_size(joints);
    if (size <= kShapeDim || (size - kShapeDim) % block != 0) {
        throw ValidationError("packed vector of length " + std::to_string(size) + " is not 10 + " +
                              std::to_string(block) + " T");
    }
    return static_cast<int>((size - kShapeDim) / block);
}

} // namespace pose_ba
