// Energy + gradient throughput: serial reference against the fused parallel
// evaluator, and one full solve. Argument is the frame count.

#include "pose_ba/io.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace pose_ba;

SequenceProblem make_problem(int frames)
{
    static const BodyModel model = default_body_model();
    static const GmmPrior prior = io::load_gmm(POSE_BA_DATA_DIR "/data/gmm_synth.json");
    SynthConfig c;
    c.frames = frames;
    c.people = 2;
    c.outlier_rate = 0.05;
    c.seed = 3;
    const SequenceFile seq = generate_synthetic_sequence(c, model);
    const Track track = shortest_path_track(seq.frames);
    const InitialEstimate init = initialize_sequence(track, *seq.estimates, model);
    return build_problem(seq, track, init, model, prior, EnergyConfig::kinetics());
}

void BM_reference(benchmark::State& state)
{
    const SequenceProblem problem = make_problem(static_cast<int>(state.range(0)));
    const Eigen::VectorXd x = pack(solution_from_initial_estimate(problem.init));
    Eigen::VectorXd g(x.size());
    for (auto _ : state) {
        benchmark::DoNotOptimize(reference::energy_and_gradient(problem, x, g));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_parallel(benchmark::State& state)
{
    const SequenceProblem problem = make_problem(static_cast<int>(state.range(0)));
    EnergyEvaluator evaluator(problem);
    const Eigen::VectorXd x = pack(solution_from_initial_estimate(problem.init));
    Eigen::VectorXd g(x.size());
    for (auto _ : state) {
        benchmark::DoNotOptimize(evaluator(x, g));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_solve(benchmark::State& state)
{
    const SequenceProblem problem = make_problem(static_cast<int>(state.range(0)));
    SolverConfig solver;
    solver.max_iterations = 100;
    for (auto _ : state) {
        benchmark::DoNotOptimize(optimize_sequence(problem, solver).report.final_energy);
    }
}

} // namespace

BENCHMARK(BM_reference)->Arg(10)->Arg(50)->Arg(250)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_parallel)->Arg(10)->Arg(50)->Arg(250)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_solve)->Arg(50)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
