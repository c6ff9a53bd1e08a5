// pose-ba: command-line front end (synth, fit, eval, select, plus helpers to
// export the built-in body model and fit a synthetic joint-angle prior).

#include "pose_ba/io.hpp"
#include "pose_ba/metrics.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

namespace fs = std::filesystem;
using namespace pose_ba;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitSolver = 2;

struct CommonOptions {
    std::string model;
    std::string prior = std::string(POSE_BA_DATA_DIR) + "/data/gmm_synth.json";
};

BodyModel load_model(const CommonOptions& o)
{
    return o.model.empty() ? default_body_model() : io::load_body_model(o.model);
}

struct FitOptions {
    std::string input;
    std::string out;
    std::string energy;
    std::string solver;
    std::string terms;
    int max_iters = -1;
    double grad_tol = -1.0;
    double tau_r = -1.0;
    double enorm_threshold = -1.0;
    double skip_penalty = kDefaultSkipPenalty;
    int threads = 0;
    int jobs = 0;
    bool rigid_only = false;
    bool timing = false;
};

PipelineConfig pipeline_config(const FitOptions& o)
{
    PipelineConfig c;
    if (!o.energy.empty()) {
        c.energy = io::energy_config_from_json(io::read_json(o.energy));
    }
    if (!o.terms.empty()) {
        c.energy = c.energy.with_terms(o.terms);
    }
    if (!o.solver.empty()) {
        c.solver = io::solver_config_from_json(io::read_json(o.solver));
    }
    if (o.max_iters >= 0) {
        c.solver.max_iterations = o.max_iters;
    }
    if (o.grad_tol >= 0.0) {
        c.solver.gradient_tolerance = o.grad_tol;
    }
    c.solver.validate();
    if (o.tau_r > 0.0) {
        c.thresholds.tau_R = o.tau_r;
    }
    if (o.enorm_threshold > 0.0) {
        c.thresholds.e_norm_threshold = o.enorm_threshold;
    }
    if (!(o.skip_penalty >= 0.0)) {
        throw ValidationError("--skip-penalty must be >= 0");
    }
    c.skip_penalty = o.skip_penalty;
    c.rigid_only = o.rigid_only;
    return c;
}

void fit_file(const fs::path& in, const fs::path& out, const BodyModel& model, const GmmPrior& prior,
              const PipelineConfig& config, bool timing)
{
    const SequenceFile seq = io::load_sequence(in, model.joint_count());
    const PipelineResult result = run_pipeline(seq, model, prior, config);
    io::save_solution(out, seq.video_id, result, timing);
}

int run_fit(const FitOptions& o, const CommonOptions& common)
{
    const BodyModel model = load_model(common);
    const GmmPrior prior = io::load_gmm(common.prior);
    const PipelineConfig config = pipeline_config(o);
    if (o.threads > 0) {
        set_thread_count(o.threads);
    }

    if (!fs::is_directory(o.input)) {
        fit_file(o.input, o.out, model, prior, config, o.timing);
        return 0;
    }

    // Directory mode: one solve per worker, each output written atomically.
    std::vector<fs::path> inputs;
    for (const auto& entry : fs::directory_iterator(o.input)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            inputs.push_back(entry.path());
        }
    }
    std::sort(inputs.begin(), inputs.end());
    fs::create_directories(o.out);

    const int jobs = o.jobs > 0 ? o.jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    int status = 0;
    auto worker = [&] {
        if (o.threads > 0) {
            set_thread_count(o.threads);
        }
        for (std::size_t i = next++; i < inputs.size(); i = next++) {
            const fs::path out = fs::path(o.out) / inputs[i].filename();
            int code = 0;
            std::string message;
            try {
                fit_file(inputs[i], out, model, prior, config, o.timing);
            }
            catch (const SolverError& e) {
                code = kExitSolver;
                message = e.what();
            }
            catch (const std::exception& e) {
                code = kExitValidation;
                message = e.what();
            }
            if (code != 0) {
                std::lock_guard lock(log_mutex);
                std::cerr << "error: " << inputs[i].string() << ": " << message << '\n';
                status = std::max(status, code);
            }
        }
    };
    std::vector<std::thread> pool;
    for (int j = 0; j < std::min<int>(jobs, static_cast<int>(inputs.size())); ++j) {
        pool.emplace_back(worker);
    }
    for (auto& t : pool) {
        t.join();
    }
    return status;
}

int run_eval(const std::string& solution_path, const std::string& sequence_path, const std::string& out,
             bool rigid_only, const CommonOptions& common)
{
    const BodyModel model = load_model(common);
    const SequenceFile seq = io::load_sequence(sequence_path, model.joint_count());
    if (!seq.ground_truth) {
        throw ValidationError(sequence_path + ": no ground_truth section");
    }
    const io::json doc = io::read_json(solution_path);
    const io::json& sol = doc.contains("solution") ? doc.at("solution") : doc;
    const SequenceSolution solution = io::solution_from_json(sol, model.joint_count());
    const SequenceMetrics m =
        evaluate_sequence(solution_joints(model, solution), seq.ground_truth->joints, rigid_only);
    const std::string csv = io::metrics_csv(m);
    std::cout << csv;
    if (!out.empty()) {
        io::write_text_atomic(out, csv);
    }
    return 0;
}

int run_select(const std::string& dir, double threshold, double fraction, const std::string& out)
{
    struct Entry {
        std::string file;
        std::string video_id;
        double e_norm;
    };
    std::vector<Entry> entries;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        const io::json doc = io::read_json(f);
        if (!doc.is_object() || !doc.contains("normalized_energy") || !doc.contains("video_id")) {
            continue; // not a fit result
        }
        const auto& e = doc.at("normalized_energy");
        entries.push_back({f.filename().string(), doc.at("video_id").get<std::string>(),
                           e.is_number() ? e.get<double>() : std::numeric_limits<double>::infinity()});
    }
    if (fraction >= 0.0) {
        if (fraction > 1.0) {
            throw ValidationError("--retain-fraction must lie in [0, 1]");
        }
        std::vector<double> energies;
        for (const auto& e : entries) {
            energies.push_back(e.e_norm);
        }
        threshold = calibrate_enorm_threshold(energies, fraction);
    }
    io::json selected = io::json::array();
    io::json rejected = io::json::array();
    for (const auto& e : entries) {
        io::json item = {{"file", e.file}, {"video_id", e.video_id},
                         {"normalized_energy", std::isfinite(e.e_norm) ? io::json(e.e_norm) : io::json(nullptr)}};
        (e.e_norm < threshold ? selected : rejected).push_back(std::move(item));
    }
    io::json manifest = {{"enorm_threshold", std::isfinite(threshold) ? io::json(threshold) : io::json(nullptr)},
                         {"selected", selected},
                         {"rejected", rejected}};
    io::write_json_atomic(out, manifest);
    std::cout << selected.size() << " of " << entries.size() << " videos selected\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Articulated bundle adjustment of 3D body pose from 2D keypoints"};
    app.require_subcommand(1);
    CommonOptions common;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic sequence with ground truth");
    std::string synth_config;
    std::string synth_out;
    std::optional<unsigned> synth_seed;
    synth->add_option("--config", synth_config, "SynthConfig JSON (defaults when omitted)");
    synth->add_option("--seed", synth_seed, "Override the config seed");
    synth->add_option("--out", synth_out, "Output sequence JSON")->required();
    synth->add_option("--model", common.model, "BodyModel JSON (built-in 24-joint body by default)");

    auto* fit = app.add_subcommand("fit", "Track, optimise and select one sequence or a directory of them");
    FitOptions fo;
    fit->add_option("input", fo.input, "Sequence JSON or directory of them")->required();
    fit->add_option("--out", fo.out, "Result JSON (or directory in directory mode)")->required();
    fit->add_option("--energy", fo.energy, "EnergyConfig JSON (h36m weights by default)");
    fit->add_option("--solver", fo.solver, "SolverConfig JSON");
    fit->add_option("--model", common.model, "BodyModel JSON");
    fit->add_option("--prior", common.prior, "GMM prior JSON");
    fit->add_option("--max-iters", fo.max_iters, "L-BFGS iteration cap");
    fit->add_option("--grad-tol", fo.grad_tol, "Gradient infinity-norm tolerance");
    fit->add_option("--tau-r", fo.tau_r, "Inlier-frame threshold on the reprojection error");
    fit->add_option("--enorm-threshold", fo.enorm_threshold, "Video selection threshold on E_norm");
    fit->add_option("--skip-penalty", fo.skip_penalty, "Tracking penalty per skipped frame (pixels)");
    fit->add_option("--terms", fo.terms, "Energy terms to keep: any of R, P, T");
    fit->add_option("--threads", fo.threads, "Worker threads per solve");
    fit->add_option("--jobs", fo.jobs, "Files solved concurrently in directory mode");
    fit->add_flag("--rigid-only", fo.rigid_only, "PA-MPJPE without scale");
    fit->add_flag("--timing", fo.timing, "Record wall-clock time in the report");

    auto* eval = app.add_subcommand("eval", "Per-frame MPJPE / PA-MPJPE of a fit against ground truth");
    std::string eval_solution;
    std::string eval_sequence;
    std::string eval_out;
    bool eval_rigid = false;
    eval->add_option("solution", eval_solution, "Result or solution JSON")->required();
    eval->add_option("sequence", eval_sequence, "Sequence JSON with ground truth")->required();
    eval->add_option("--out", eval_out, "Also write the CSV here");
    eval->add_option("--model", common.model, "BodyModel JSON");
    eval->add_flag("--rigid-only", eval_rigid, "PA-MPJPE without scale");

    auto* select = app.add_subcommand("select", "Select videos of a directory of fit results by E_norm");
    std::string select_dir;
    std::string select_out;
    double select_threshold = -1.0;
    double select_fraction = -1.0;
    select->add_option("--dir", select_dir, "Directory of result JSON files")->required();
    auto* thr = select->add_option("--enorm-threshold", select_threshold, "Keep videos with E_norm below this");
    auto* frac =
        select->add_option("--retain-fraction", select_fraction, "Calibrate the threshold to keep this fraction");
    thr->excludes(frac);
    select->add_option("--out", select_out, "Manifest JSON")->required();

    auto* model_cmd = app.add_subcommand("model", "Write the built-in body model as JSON");
    std::string model_out;
    model_cmd->add_option("--out", model_out, "Output JSON")->required();

    auto* prior_cmd = app.add_subcommand("prior", "Fit a joint-angle GMM to synthetic poses");
    std::string prior_out;
    int prior_samples = 20000;
    int prior_components = 8;
    unsigned prior_seed = 7;
    prior_cmd->add_option("--out", prior_out, "Output GMM JSON")->required();
    prior_cmd->add_option("--samples", prior_samples, "Number of sampled poses");
    prior_cmd->add_option("--components", prior_components, "Mixture components");
    prior_cmd->add_option("--seed", prior_seed, "Random seed");
    prior_cmd->add_option("--model", common.model, "BodyModel JSON");

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (synth->parsed()) {
            SynthConfig c = synth_config.empty() ? SynthConfig{} : io::synth_config_from_json(io::read_json(synth_config));
            if (synth_seed) {
                c.seed = *synth_seed;
            }
            io::save_sequence(synth_out, generate_synthetic_sequence(c, load_model(common)));
            return 0;
        }
        if (fit->parsed()) {
            return run_fit(fo, common);
        }
        if (eval->parsed()) {
            return run_eval(eval_solution, eval_sequence, eval_out, eval_rigid, common);
        }
        if (select->parsed()) {
            if (select_threshold < 0.0 && select_fraction < 0.0) {
                throw ValidationError("select: give --enorm-threshold or --retain-fraction");
            }
            return run_select(select_dir, select_threshold, select_fraction, select_out);
        }
        if (model_cmd->parsed()) {
            io::write_json_atomic(model_out, io::to_json(default_body_model()));
            return 0;
        }
        if (prior_cmd->parsed()) {
            if (prior_samples < prior_components * 10) {
                throw ValidationError("prior: too few samples for the component count");
            }
            io::write_json_atomic(prior_out,
                                  io::to_json(fit_synthetic_prior(load_model(common), prior_samples, prior_seed,
                                                                  prior_components)));
            return 0;
        }
    }
    catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return kExitSolver;
    }
    catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return 0;
}
