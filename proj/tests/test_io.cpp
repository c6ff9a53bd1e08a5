#include "pose_ba/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace pose_ba;
using io::json;

namespace {

std::filesystem::path scratch(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / "pose_ba_test_io";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string error_of(auto&& fn)
{
    try {
        fn();
    }
    catch (const ValidationError& e) {
        return e.what();
    }
    return {};
}

SequenceFile sample_sequence()
{
    SynthConfig c;
    c.frames = 6;
    c.people = 2;
    c.outlier_rate = 0.1;
    c.miss_rate = 0.2;
    c.seed = 77;
    return generate_synthetic_sequence(c, default_body_model());
}

} // namespace

TEST_CASE("sequence files round-trip bit-exactly through disk")
{
    const SequenceFile seq = sample_sequence();
    const auto path = scratch("seq.json");
    io::save_sequence(path, seq);
    const SequenceFile back = io::load_sequence(path, 24);
    CHECK(io::to_json(back) == io::to_json(seq));
    REQUIRE(back.frames.size() == seq.frames.size());
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
        REQUIRE(back.frames[t].people.size() == seq.frames[t].people.size());
        for (std::size_t p = 0; p < seq.frames[t].people.size(); ++p) {
            CHECK(back.frames[t].people[p].keypoints == seq.frames[t].people[p].keypoints);
            CHECK(back.frames[t].people[p].confidence == seq.frames[t].people[p].confidence);
        }
    }
    CHECK(back.ground_truth->beta == seq.ground_truth->beta);
    CHECK(back.ground_truth->thetas == seq.ground_truth->thetas);
    CHECK(back.estimates->at(3).at(0).theta == seq.estimates->at(3).at(0).theta);
    CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
}

TEST_CASE("body model and GMM round-trip bit-exactly")
{
    const BodyModel model = default_body_model();
    const BodyModel model_back = io::body_model_from_json(json::parse(io::to_json(model).dump()));
    CHECK(model_back.parents() == model.parents());
    CHECK(model_back.rest_offsets() == model.rest_offsets());
    for (int i = 0; i < model.joint_count(); ++i) {
        CHECK(model_back.shape_basis(i) == model.shape_basis(i));
    }

    const GmmPrior prior = io::load_gmm(POSE_BA_DATA_DIR "/data/gmm_synth.json");
    const GmmPrior prior_back = io::gmm_from_json(io::json::parse(io::to_json(prior).dump()));
    CHECK(prior_back.weights() == prior.weights());
    CHECK(prior_back.means() == prior.means());
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(prior.dim(), 0.1);
    CHECK(prior_back.negative_log_likelihood(x) == prior.negative_log_likelihood(x));
}

TEST_CASE("configs round-trip and reject unknown keys")
{
    EnergyConfig e = EnergyConfig::kinetics();
    e.lambda_2 = 0.123456789012345678;
    CHECK(io::to_json(io::energy_config_from_json(io::to_json(e))) == io::to_json(e));

    SolverConfig s;
    s.max_iterations = 77;
    s.gradient_tolerance = 3e-7;
    CHECK(io::to_json(io::solver_config_from_json(io::to_json(s))) == io::to_json(s));

    SynthConfig c;
    c.seed = 123;
    c.outlier_rate = 0.07;
    CHECK(io::to_json(io::synth_config_from_json(io::to_json(c))) == io::to_json(c));

    // partial documents keep the base values
    const EnergyConfig partial = io::energy_config_from_json(json{{"lambda_R", 2.0}}, EnergyConfig::h36m());
    CHECK(partial.lambda_R == 2.0);
    CHECK(partial.lambda_I == EnergyConfig::h36m().lambda_I);

    const std::string msg = error_of([] { io::energy_config_from_json(json{{"lambda_X", 1.0}}); });
    CHECK(msg.find("lambda_X") != std::string::npos);
    CHECK_THROWS_AS(io::energy_config_from_json(json{{"lambda_R", -1.0}}), ValidationError);
    CHECK_THROWS_AS(io::energy_config_from_json(json{{"lambda_R", "big"}}), ValidationError);
    CHECK_THROWS_AS(io::synth_config_from_json(json{{"seed", -3}}), ValidationError);
}

TEST_CASE("shipped presets load and match the tabulated values")
{
    const auto h36m = io::energy_config_from_json(io::read_json(POSE_BA_DATA_DIR "/config/h36m.json"));
    CHECK(io::to_json(h36m) == io::to_json(EnergyConfig::h36m()));
    const auto kinetics = io::energy_config_from_json(io::read_json(POSE_BA_DATA_DIR "/config/kinetics.json"));
    CHECK(io::to_json(kinetics) == io::to_json(EnergyConfig::kinetics()));
    CHECK(kinetics.robust_mode);
    CHECK(kinetics.lambda_3 == 20.0);
    CHECK(h36m.lambda_I == 10.0);
    io::energy_config_from_json(io::read_json(POSE_BA_DATA_DIR "/config/synthetic.json"));
    io::synth_config_from_json(io::read_json(POSE_BA_DATA_DIR "/config/synth.json"));
}

TEST_CASE("missing and malformed fields are reported with their path")
{
    json doc = io::to_json(sample_sequence());
    doc["frames"][2]["people"][0].erase("keypoints");
    std::string msg = error_of([&] { io::sequence_from_json(doc, 24); });
    CHECK(msg.find("frames[2].people[0]") != std::string::npos);
    CHECK(msg.find("keypoints") != std::string::npos);

    doc = io::to_json(sample_sequence());
    doc["frames"][1]["people"][0]["confidence"][3] = "high";
    msg = error_of([&] { io::sequence_from_json(doc, 24); });
    CHECK(msg.find("frames[1].people[0].confidence") != std::string::npos);

    doc = io::to_json(sample_sequence());
    doc["frames"][0]["people"][0]["keypoints"].erase(0);
    CHECK_THROWS_AS(io::sequence_from_json(doc, 24), ValidationError);

    doc = io::to_json(sample_sequence());
    doc["initial_estimates"].erase(0); // one frame short
    CHECK_THROWS_AS(io::sequence_from_json(doc, 24), ValidationError);

    doc = io::to_json(sample_sequence());
    doc["ground_truth"]["thetas"].erase(0);
    CHECK_THROWS_AS(io::sequence_from_json(doc, 24), ValidationError);
}

TEST_CASE("unreadable and unparsable files are validation errors")
{
    CHECK_THROWS_AS(io::read_json(scratch("does_not_exist.json")), ValidationError);
    const auto path = scratch("broken.json");
    std::ofstream(path) << "{\"frames\": [1, 2";
    const std::string msg = error_of([&] { io::read_json(path); });
    CHECK(msg.find("broken.json") != std::string::npos);
}

TEST_CASE("solutions, tracks and results serialise")
{
    std::mt19937_64 rng(1);
    SequenceSolution sol;
    sol.beta = Shape::Random();
    for (int t = 0; t < 3; ++t) {
        sol.thetas.push_back(Pose::Random(72));
        sol.cameras.push_back({100.0 + t, Vec2(1.5, -2.25)});
    }
    const SequenceSolution back = io::solution_from_json(json::parse(io::to_json(sol).dump()), 24);
    CHECK(back.beta == sol.beta);
    CHECK(back.thetas == sol.thetas);
    CHECK(back.cameras == sol.cameras);
    CHECK_THROWS_AS(io::solution_from_json(io::to_json(sol), 23), ValidationError);

    Track track;
    track.selection = {0, kSkip, 2};
    CHECK(io::to_json(track) == json::array({0, -1, 2}));
    CHECK(io::track_from_json(io::to_json(track)).selection == track.selection);

    const Joints3 cloud = Joints3::Identity(3, 3);
    const std::string csv = io::metrics_csv(evaluate_sequence({cloud, cloud}, {cloud, cloud}));
    CHECK(csv.rfind("frame,mpjpe_mm,pa_mpjpe_mm\n", 0) == 0);
    CHECK(csv.find("mean,") != std::string::npos);
}
