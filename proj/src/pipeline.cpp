#include "pose_ba/pipeline.hpp"

#include "pose_ba/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace pose_ba {

void SequenceFile::validate(int joint_count) const
{
    const auto n = frames.size();
    if (n == 0) {
        throw ValidationError("sequence: no frames");
    }
    if (!(image_width > 0.0 && image_height > 0.0)) {
        throw ValidationError("sequence: image_width and image_height must be positive");
    }
    for (std::size_t t = 0; t < n; ++t) {
        const auto& people = frames[t].people;
        const std::string where = "frames[" + std::to_string(t) + "]";
        if (people.size() > kMaxPeoplePerFrame) {
            throw ValidationError(where + ": more than " + std::to_string(kMaxPeoplePerFrame) + " people");
        }
        for (std::size_t p = 0; p < people.size(); ++p) {
            const auto& det = people[p];
            const std::string who = where + ".people[" + std::to_string(p) + "]";
            if (det.keypoints.rows() != joint_count || det.confidence.size() != joint_count) {
                throw ValidationError(who + ": expected " + std::to_string(joint_count) + " joints");
            }
            for (int i = 0; i < joint_count; ++i) {
                const double w = det.confidence[i];
                if (!(w >= 0.0 && w <= 1.0)) {
                    throw ValidationError(who + ".confidence[" + std::to_string(i) + "]: must lie in [0, 1]");
                }
                const double x = det.keypoints(i, 0);
                const double y = det.keypoints(i, 1);
                if (!std::isfinite(x) || !std::isfinite(y)) {
                    throw ValidationError(who + ".keypoints[" + std::to_string(i) + "]: not finite");
                }
                const bool inside = x >= 0.0 && x <= image_width && y >= 0.0 && y <= image_height;
                if (!inside && w > 0.0) {
                    throw ValidationError(who + ".keypoints[" + std::to_string(i) +
                                          "]: outside the image but confidence is not 0");
                }
            }
        }
    }
    if (estimates) {
        if (estimates->size() != n) {
            throw ValidationError("initial_estimates: " + std::to_string(estimates->size()) +
                                  " frames, detections have " + std::to_string(n));
        }
        for (std::size_t t = 0; t < n; ++t) {
            if ((*estimates)[t].size() != frames[t].people.size()) {
                throw ValidationError("initial_estimates[" + std::to_string(t) +
                                      "]: one estimate per detected person is required");
            }
            for (const auto& est : (*estimates)[t]) {
                if (est.theta.size() != 3 * joint_count) {
                    throw ValidationError("initial_estimates[" + std::to_string(t) + "]: theta must have " +
                                          std::to_string(3 * joint_count) + " entries");
                }
                if (!(est.camera.scale > 0.0)) {
                    throw ValidationError("initial_estimates[" + std::to_string(t) + "]: camera scale must be > 0");
                }
            }
        }
    }
    if (ground_truth) {
        const auto& gt = *ground_truth;
        if (gt.joints.size() != n || (!gt.thetas.empty() && gt.thetas.size() != n) ||
            (!gt.cameras.empty() && gt.cameras.size() != n)) {
            throw ValidationError("ground_truth: frame count differs from detections");
        }
        for (const auto& j : gt.joints) {
            if (j.rows() != joint_count) {
                throw ValidationError("ground_truth.joints: expected " + std::to_string(joint_count) + " joints");
            }
        }
    }
}

std::vector<Joints3> solution_joints(const BodyModel& model, const SequenceSolution& solution)
{
    std::vector<Joints3> out;
    out.reserve(solution.thetas.size());
    for (const auto& theta : solution.thetas) {
        out.push_back(forward_kinematics(model, solution.beta, theta));
    }
    return out;
}

SequenceMetrics evaluate_sequence(const std::vector<Joints3>& predicted, const std::vector<Joints3>& truth,
                                  bool rigid_only)
{
    if (predicted.size() != truth.size() || predicted.empty()) {
        throw ValidationError("evaluate_sequence: prediction and ground truth differ in frame count");
    }
    SequenceMetrics m;
    for (std::size_t t = 0; t < predicted.size(); ++t) {
        m.mpjpe.push_back(mpjpe(predicted[t], truth[t]));
        m.pa_mpjpe.push_back(pa_mpjpe(predicted[t], truth[t], !rigid_only));
        m.mean_mpjpe += m.mpjpe.back();
        m.mean_pa_mpjpe += m.pa_mpjpe.back();
    }
    m.mean_mpjpe /= static_cast<double>(predicted.size());
    m.mean_pa_mpjpe /= static_cast<double>(predicted.size());
    return m;
}

SequenceProblem build_problem(const SequenceFile& sequence, const Track& track, const InitialEstimate& init,
                              const BodyModel& model, const GmmPrior& prior, EnergyConfig energy)
{
    if (energy.image_width <= 0.0) {
        energy.image_width = sequence.image_width;
    }
    std::vector<FrameDetections> frames =
        energy.robust_mode ? sequence.frames : tracked_detections(track, sequence.frames);
    SequenceProblem problem{model, prior, energy, std::move(frames), init};
    problem.validate();
    return problem;
}

PipelineResult run_pipeline(const SequenceFile& sequence, const BodyModel& model, const GmmPrior& prior,
                            const PipelineConfig& config)
{
    sequence.validate(model.joint_count());
    if (!sequence.estimates) {
        throw ValidationError("run_pipeline: the sequence has no initial_estimates");
    }
    PipelineResult result;
    result.track = shortest_path_track(sequence.frames, config.skip_penalty);
    result.init = initialize_sequence(result.track, *sequence.estimates, model);

    const SequenceProblem problem = build_problem(sequence, result.track, result.init, model, prior, config.energy);
    auto fit = optimize_sequence(problem, config.solver);
    result.solution = std::move(fit.solution);
    result.report = std::move(fit.report);
    result.energy = energy_terms(problem, result.solution);

    const double total = result.energy.total();
    if (sequence.frame_count() >= 2) {
        result.normalized_energy = normalized_energy(model, result.solution, total);
        result.selected = select_video(model, result.solution, total, config.thresholds);
    }
    else {
        result.normalized_energy = std::numeric_limits<double>::infinity();
        result.selected = false;
    }
    result.inlier_frames =
        select_inlier_frames(model, result.solution, sequence.frames, problem.config, config.thresholds);

    if (sequence.ground_truth) {
        const auto& truth = sequence.ground_truth->joints;
        result.init_metrics = evaluate_sequence(result.init.joints, truth, config.rigid_only);
        result.solution_metrics =
            evaluate_sequence(solution_joints(model, result.solution), truth, config.rigid_only);
    }
    return result;
}

} // namespace pose_ba
