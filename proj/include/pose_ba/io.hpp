#pragma once

#include "pose_ba/pipeline.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace pose_ba::io {

using nlohmann::json;

// Every reader throws ValidationError naming the offending field path
// (e.g. "frames[3].people[0].keypoints") or the parse position.

json read_json(const std::filesystem::path& path);

/// Writes to a temporary sibling and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
void write_json_atomic(const std::filesystem::path& path, const json& doc);

BodyModel body_model_from_json(const json& doc);
json to_json(const BodyModel& model);
BodyModel load_body_model(const std::filesystem::path& path);

GmmPrior gmm_from_json(const json& doc);
json to_json(const GmmPrior& prior);
GmmPrior load_gmm(const std::filesystem::path& path);

/// Unknown keys are rejected; missing keys keep the defaults of `base`.
EnergyConfig energy_config_from_json(const json& doc, EnergyConfig base = {});
json to_json(const EnergyConfig& config);

SolverConfig solver_config_from_json(const json& doc, SolverConfig base = {});
json to_json(const SolverConfig& config);

SynthConfig synth_config_from_json(const json& doc);
json to_json(const SynthConfig& config);

json to_json(const CameraParams& camera);
CameraParams camera_from_json(const json& doc, const std::string& path);

json to_json(const SequenceSolution& solution);
SequenceSolution solution_from_json(const json& doc, int joint_count, const std::string& path = "solution");

/// Person indices with -1 for skipped frames.
json to_json(const Track& track);
Track track_from_json(const json& doc, double skip_penalty = kDefaultSkipPenalty);

/// wall_seconds is left out unless include_timing, so that repeated runs
/// produce identical files.
json to_json(const SolveReport& report, bool include_timing = false);

json to_json(const SequenceFile& sequence);
SequenceFile sequence_from_json(const json& doc, int joint_count);
SequenceFile load_sequence(const std::filesystem::path& path, int joint_count);
void save_sequence(const std::filesystem::path& path, const SequenceFile& sequence);

json to_json(const SequenceMetrics& metrics);

/// Full result document of one fit.
json result_to_json(const std::string& video_id, const PipelineResult& result, bool include_timing = false);
void save_solution(const std::filesystem::path& path, const std::string& video_id, const PipelineResult& result,
                   bool include_timing = false);

/// Per-frame and mean MPJPE / PA-MPJPE as CSV.
std::string metrics_csv(const SequenceMetrics& metrics);

} // namespace pose_ba::io
