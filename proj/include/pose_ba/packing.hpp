#pragma once

#include "pose_ba/energy.hpp"

namespace pose_ba {

/// Packed layout: [beta (10) | per frame: theta (3J), log(s) (1), u (2)].
/// With the default 24-joint body this is 10 + 75 T values.
inline Eigen::Index packed_size(int frames, int joints = kDefaultJointCount)
{
    return kShapeDim + static_cast<Eigen::Index>(frames) * (3 * joints + 3);
}

inline Eigen::Index frame_block_size(int joints) { return 3 * joints + 3; }

inline Eigen::Index frame_offset(int frame, int joints)
{
    return kShapeDim + static_cast<Eigen::Index>(frame) * frame_block_size(joints);
}

Eigen::VectorXd pack(const SequenceSolution& solution);

/// Inverse of pack. Throws ValidationError when the length does not match
/// the frame and joint counts.
SequenceSolution unpack(const Eigen::Ref<const Eigen::VectorXd>& packed, int frames,
                        int joints = kDefaultJointCount);

/// Frame count implied by a packed length, or throws.
int packed_frame_count(Eigen::Index size, int joints = kDefaultJointCount);

} // namespace pose_ba
