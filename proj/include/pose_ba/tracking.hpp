#pragma once

#include "pose_ba/energy.hpp"

#include <set>
#include <span>
#include <vector>

namespace pose_ba {

inline constexpr int kSkip = -1;
inline constexpr double kDefaultSkipPenalty = 100.0;

/// One selected person index per frame, or kSkip.
struct Track {
    std::vector<int> selection;
    double skip_penalty = kDefaultSkipPenalty;
    double cost = 0.0;

    int frame_count() const { return static_cast<int>(selection.size()); }
    bool skipped(int frame) const { return selection[static_cast<std::size_t>(frame)] == kSkip; }
};

struct SelectionThresholds {
    double tau_R = 50.0;
    double e_norm_threshold = 1.0;
};

/// Mean squared pixel distance over joints visible (w > 0) in both
/// detections; +inf when no joint is shared.
double detection_distance(const Detection& a, const Detection& b);

/// Cost of an explicit selection: skip penalties plus distances between
/// consecutive selected detections. Only skips between the first and last
/// occupied frames are charged; a selection that skips either of those
/// frames, or a hop with no shared joints, costs +inf.
double track_cost(std::span<const FrameDetections> frames, const std::vector<int>& selection, double skip_penalty);

/// Globally cheapest selection by dynamic programming over (frame, person)
/// nodes. Every skipped frame costs skip_penalty; a hop across skipped frames
/// costs the distance between the detections on either side of the gap.
/// The path starts in the first occupied frame and ends in the last one
/// (free source/sink edges); empty frames outside that span are free.
/// Throws ValidationError when the video contains no detection.
Track shortest_path_track(std::span<const FrameDetections> frames, double skip_penalty = kDefaultSkipPenalty);

/// Per-person estimate from a single-frame regressor.
struct PersonEstimate {
    Shape beta = Shape::Zero();
    Pose theta;
    CameraParams camera;
};

/// Copies the tracked person's estimate for every selected frame; skipped
/// frames take the nearest selected frame (earlier one on ties).
/// estimates[t][p] belongs to frames[t].people[p].
InitialEstimate initialize_sequence(const Track& track, const std::vector<std::vector<PersonEstimate>>& estimates,
                                    const BodyModel& model);

/// Keeps the detection of the tracked person per frame (none for skips).
std::vector<FrameDetections> tracked_detections(const Track& track, std::span<const FrameDetections> frames);

/// Frames whose best-person weighted Huber reprojection error is < tau_R.
std::set<int> select_inlier_frames(const BodyModel& model, const SequenceSolution& solution,
                                   std::span<const FrameDetections> frames, const EnergyConfig& config,
                                   const SelectionThresholds& thresholds);

/// True iff the normalised energy is below the threshold.
bool select_video(const BodyModel& model, const SequenceSolution& solution, double total_energy,
                  const SelectionThresholds& thresholds);

/// Threshold retaining the lowest `fraction` of the given normalised
/// energies: midway between the k-th and (k+1)-th smallest, k = ceil(f n).
double calibrate_enorm_threshold(std::vector<double> normalized_energies, double fraction);

} // namespace pose_ba
