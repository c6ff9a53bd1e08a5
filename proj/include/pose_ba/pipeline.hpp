#pragma once

#include "pose_ba/energy.hpp"
#include "pose_ba/solver.hpp"
#include "pose_ba/tracking.hpp"

#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace pose_ba {

struct GroundTruth {
    Shape beta = Shape::Zero();
    std::vector<Pose> thetas;
    std::vector<CameraParams> cameras;
    std::vector<Joints3> joints;
};

/// Detections of one video plus optional per-person initial estimates and,
/// for synthetic data, the ground truth of the tracked subject.
struct SequenceFile {
    std::string video_id;
    double image_width = 0.0;
    double image_height = 0.0;
    std::vector<FrameDetections> frames;
    /// estimates[t][p] belongs to frames[t].people[p]
    std::optional<std::vector<std::vector<PersonEstimate>>> estimates;
    std::optional<GroundTruth> ground_truth;

    int frame_count() const { return static_cast<int>(frames.size()); }

    /// Frame counts agree across sections; keypoints outside the image carry
    /// zero confidence; estimate and detection lists line up.
    void validate(int joint_count) const;
};

struct SynthConfig {
    std::string video_id = "synthetic";
    int frames = 50;
    int people = 1;
    double detection_noise = 3.0; // pixels
    double outlier_rate = 0.0;    // fraction of joints replaced by uniform positions
    double miss_rate = 0.0;       // fraction of frames without the subject
    double init_theta_noise = 0.15; // radians, every pose entry
    double init_beta_noise = 0.1;   // shape-coefficient units
    double init_camera_noise = 0.02; // relative on scale; times scale in meters on translation
    double motion_amplitude = 1.0;   // 0 gives a static subject
    double camera_motion = 15.0;     // pixels
    double distractor_offset = 150.0; // pixels between people
    double image_width = 400.0;
    double image_height = 400.0;
    unsigned seed = 1;

    void validate() const;
};

/// Draws a plausible non-root pose (3 (J - 1) angles) from the synthetic
/// activity mixture the generator uses.
Eigen::VectorXd sample_synthetic_angles(std::mt19937_64& rng, int joint_count, double motion_amplitude = 1.0);

/// Mixture prior fitted by EM to samples of sample_synthetic_angles.
GmmPrior fit_synthetic_prior(const BodyModel& model, int samples, unsigned seed, int components = 8);

/// Synthetic video with smooth ground-truth motion, noisy detections,
/// optional outliers, distractors and misses, and noisy initial estimates.
/// Fully determined by config.seed.
SequenceFile generate_synthetic_sequence(const SynthConfig& config, const BodyModel& model);

struct PipelineConfig {
    EnergyConfig energy;
    SolverConfig solver;
    SelectionThresholds thresholds;
    double skip_penalty = kDefaultSkipPenalty;
    bool rigid_only = false;
};

struct SequenceMetrics {
    std::vector<double> mpjpe;    // mm, per frame
    std::vector<double> pa_mpjpe; // mm, per frame
    double mean_mpjpe = 0.0;
    double mean_pa_mpjpe = 0.0;
};

SequenceMetrics evaluate_sequence(const std::vector<Joints3>& predicted, const std::vector<Joints3>& truth,
                                  bool rigid_only = false);

std::vector<Joints3> solution_joints(const BodyModel& model, const SequenceSolution& solution);

struct PipelineResult {
    Track track;
    InitialEstimate init;
    SequenceSolution solution;
    SolveReport report;
    EnergyBreakdown energy;
    double normalized_energy = 0.0;
    bool selected = false;
    std::set<int> inlier_frames;
    std::optional<SequenceMetrics> init_metrics;
    std::optional<SequenceMetrics> solution_metrics;
};

/// The energy problem the pipeline solves for a sequence and track:
/// tracked detections only in single-person mode, every detection in robust
/// mode. image_width is taken from the sequence when the config leaves it 0.
SequenceProblem build_problem(const SequenceFile& sequence, const Track& track, const InitialEstimate& init,
                              const BodyModel& model, const GmmPrior& prior, EnergyConfig energy);

/// track -> initialise -> optimise -> select, plus metrics when ground truth
/// is present.
PipelineResult run_pipeline(const SequenceFile& sequence, const BodyModel& model, const GmmPrior& prior,
                            const PipelineConfig& config);

} // namespace pose_ba
