#include "pose_ba/tracking.hpp"

#include "energy_detail.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace pose_ba {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double detection_distance(const Detection& a, const Detection& b)
{
    if (a.keypoints.rows() != b.keypoints.rows()) {
        throw ValidationError("detection_distance: detections have different joint counts");
    }
    double sum = 0.0;
    int shared = 0;
    for (Eigen::Index i = 0; i < a.keypoints.rows(); ++i) {
        if (a.confidence[i] > 0.0 && b.confidence[i] > 0.0) {
            sum += (a.keypoints.row(i) - b.keypoints.row(i)).squaredNorm();
            ++shared;
        }
    }
    return shared == 0 ? kInf : sum / shared;
}

namespace {

// First and last frames with at least one detection, or (-1, -1).
std::pair<int, int> occupied_span(std::span<const FrameDetections> frames)
{
    int first = -1;
    int last = -1;
    for (int t = 0; t < static_cast<int>(frames.size()); ++t) {
        if (!frames[static_cast<std::size_t>(t)].people.empty()) {
            first = first < 0 ? t : first;
            last = t;
        }
    }
    return {first, last};
}

} // namespace

double track_cost(std::span<const FrameDetections> frames, const std::vector<int>& selection, double skip_penalty)
{
    if (selection.size() != frames.size()) {
        throw ValidationError("track_cost: selection length differs from frame count");
    }
    const auto [first, last] = occupied_span(frames);
    double cost = 0.0;
    const Detection* prev = nullptr;
    for (int t = 0; t < static_cast<int>(frames.size()); ++t) {
        const auto ut = static_cast<std::size_t>(t);
        const int p = selection[ut];
        const bool inside = first >= 0 && t >= first && t <= last;
        if (p == kSkip) {
            if (t == first || t == last) {
                return kInf; // the path runs from the first to the last occupied frame
            }
            cost += inside ? skip_penalty : 0.0;
            continue;
        }
        if (p < 0 || static_cast<std::size_t>(p) >= frames[ut].people.size()) {
            throw ValidationError("track_cost: frame " + std::to_string(t) + " selects a missing person");
        }
        const Detection& cur = frames[ut].people[static_cast<std::size_t>(p)];
        if (prev) {
            cost += detection_distance(*prev, cur);
        }
        prev = &cur;
    }
    return cost;
}

Track shortest_path_track(std::span<const FrameDetections> frames, double skip_penalty)
{
    if (!(skip_penalty >= 0.0)) {
        throw ValidationError("shortest_path_track: skip penalty must be >= 0");
    }
    const int n = static_cast<int>(frames.size());
    const auto [first, last] = occupied_span(frames);
    if (first < 0) {
        throw ValidationError("shortest_path_track: the video contains no detections");
    }
    // best[t][p]: cheapest path from the virtual source (free edges to every
    // person of the first occupied frame) to person p of frame t.
    struct Node {
        double cost = kInf;
        int frame = -1;
        int person = -1;
    };
    std::vector<std::vector<Node>> best(static_cast<std::size_t>(n));
    for (int t = first; t <= last; ++t) {
        const auto& people = frames[static_cast<std::size_t>(t)].people;
        auto& row = best[static_cast<std::size_t>(t)];
        row.resize(people.size());
        for (std::size_t p = 0; p < people.size(); ++p) {
            Node node;
            if (t == first) {
                node.cost = 0.0;
            }
            for (int prev = first; prev < t; ++prev) {
                const auto& prev_people = frames[static_cast<std::size_t>(prev)].people;
                const double gap = skip_penalty * (t - prev - 1);
                for (std::size_t q = 0; q < prev_people.size(); ++q) {
                    const double base = best[static_cast<std::size_t>(prev)][q].cost;
                    if (base == kInf) {
                        continue;
                    }
                    const double c = base + gap + detection_distance(prev_people[q], people[p]);
                    if (c < node.cost) {
                        node = {c, prev, static_cast<int>(q)};
                    }
                }
            }
            row[p] = node;
        }
    }

    // virtual sink: free edges from every person of the last occupied frame
    double best_cost = kInf;
    int end_person = -1;
    const auto& tail = best[static_cast<std::size_t>(last)];
    for (std::size_t p = 0; p < tail.size(); ++p) {
        if (tail[p].cost < best_cost) {
            best_cost = tail[p].cost;
            end_person = static_cast<int>(p);
        }
    }
    if (end_person < 0) {
        throw ValidationError("shortest_path_track: no finite-cost track exists (no shared joints)");
    }

    Track track;
    track.skip_penalty = skip_penalty;
    track.cost = best_cost;
    track.selection.assign(static_cast<std::size_t>(n), kSkip);
    for (int t = last, p = end_person; t >= 0;) {
        track.selection[static_cast<std::size_t>(t)] = p;
        const Node& node = best[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
        t = node.frame;
        p = node.person;
    }
    return track;
}

InitialEstimate initialize_sequence(const Track& track, const std::vector<std::vector<PersonEstimate>>& estimates,
                                    const BodyModel& model)
{
    const int n = track.frame_count();
    if (static_cast<int>(estimates.size()) != n) {
        throw ValidationError("initialize_sequence: estimates must be given for every frame");
    }
    std::vector<int> selected;
    for (int t = 0; t < n; ++t) {
        if (!track.skipped(t)) {
            selected.push_back(t);
        }
    }
    if (selected.empty()) {
        throw ValidationError("initialize_sequence: every frame of the track is skipped");
    }

    std::vector<Shape> betas;
    std::vector<Pose> thetas;
    std::vector<CameraParams> cameras;
    auto next = selected.begin();
    for (int t = 0; t < n; ++t) {
        while (next != selected.end() && *next < t) {
            ++next;
        }
        int source = t;
        if (track.skipped(t)) {
            const bool has_after = next != selected.end();
            const bool has_before = next != selected.begin();
            if (has_before && (!has_after || t - *(next - 1) <= *next - t)) {
                source = *(next - 1);
            }
            else {
                source = *next;
            }
        }
        const auto us = static_cast<std::size_t>(source);
        const int person = track.selection[us];
        if (person < 0 || static_cast<std::size_t>(person) >= estimates[us].size()) {
            throw ValidationError("initialize_sequence: frame " + std::to_string(source) +
                                  " has no estimate for the selected person");
        }
        const auto& est = estimates[us][static_cast<std::size_t>(person)];
        betas.push_back(est.beta);
        thetas.push_back(canonicalize_pose(est.theta));
        cameras.push_back(est.camera);
    }
    return make_initial_estimate(model, std::move(betas), std::move(thetas), std::move(cameras));
}

std::vector<FrameDetections> tracked_detections(const Track& track, std::span<const FrameDetections> frames)
{
    if (static_cast<int>(frames.size()) != track.frame_count()) {
        throw ValidationError("tracked_detections: track and frames differ in length");
    }
    std::vector<FrameDetections> out(frames.size());
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const int p = track.selection[t];
        if (p != kSkip) {
            out[t].people.push_back(frames[t].people.at(static_cast<std::size_t>(p)));
        }
    }
    return out;
}

std::set<int> select_inlier_frames(const BodyModel& model, const SequenceSolution& solution,
                                   std::span<const FrameDetections> frames, const EnergyConfig& config,
                                   const SelectionThresholds& thresholds)
{
    if (static_cast<int>(frames.size()) != solution.frame_count()) {
        throw ValidationError("select_inlier_frames: solution and detections differ in frame count");
    }
    std::set<int> inliers;
    for (int t = 0; t < solution.frame_count(); ++t) {
        const auto ut = static_cast<std::size_t>(t);
        const Joints2 x =
            project(forward_kinematics(model, solution.beta, solution.thetas[ut]), solution.cameras[ut]);
        double best = kInf;
        for (const auto& det : frames[ut].people) {
            best = std::min(best, detail::person_reprojection(x, det, config, false, nullptr));
        }
        if (best < thresholds.tau_R) {
            inliers.insert(t);
        }
    }
    return inliers;
}

bool select_video(const BodyModel& model, const SequenceSolution& solution, double total_energy,
                  const SelectionThresholds& thresholds)
{
    return normalized_energy(model, solution, total_energy) < thresholds.e_norm_threshold;
}

double calibrate_enorm_threshold(std::vector<double> normalized_energies, double fraction)
{
    if (normalized_energies.empty()) {
        throw ValidationError("calibrate_enorm_threshold: no energies given");
    }
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw ValidationError("calibrate_enorm_threshold: fraction must lie in [0, 1]");
    }
    std::sort(normalized_energies.begin(), normalized_energies.end());
    const auto n = normalized_energies.size();
    const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-12));
    if (k == 0) {
        return normalized_energies.front();
    }
    if (k >= n) {
        return kInf;
    }
    return 0.5 * (normalized_energies[k - 1] + normalized_energies[k]);
}

} // namespace pose_ba
