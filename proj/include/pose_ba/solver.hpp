#pragma once

#include "pose_ba/energy.hpp"
#include "pose_ba/packing.hpp"

#include <functional>
#include <string>
#include <vector>

namespace pose_ba {

struct SolverConfig {
    int max_iterations = 500;
    int memory = 10;
    double gradient_tolerance = 1e-6; // on the infinity norm
    double function_tolerance = 1e-9; // relative decrease between accepted iterates
    double c1 = 1e-4;
    double c2 = 0.9;
    int max_line_search_steps = 30;

    void validate() const;
};

enum class Termination { converged, max_iterations, line_search_failure };

std::string to_string(Termination reason);

struct SolveReport {
    int iterations = 0;
    int evaluations = 0;
    double initial_energy = 0.0;
    double final_energy = 0.0;
    double final_gradient_norm = 0.0; // infinity norm
    Termination termination = Termination::converged;
    double wall_seconds = 0.0;
    /// Energy of every accepted iterate, starting with x0.
    std::vector<double> energy_trace;
};

/// Returns f(x) and writes its gradient into grad (already sized).
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct MinimizeResult {
    Eigen::VectorXd x;
    SolveReport report;
};

/// Limited-memory BFGS with a strong-Wolfe line search (cubic
/// interpolation). When the Wolfe search fails the step is halved until the
/// sufficient-decrease condition holds; if that also fails the best iterate
/// seen so far is returned with Termination::line_search_failure.
///
/// Throws SolverError when f(x0) or its gradient is not finite.
MinimizeResult lbfgs_minimize(const Objective& objective, Eigen::VectorXd x0, const SolverConfig& config = {});

/// Analytic gradient against central differences with the given step.
///
/// A difference quotient cannot resolve a component below its round-off
/// floor eps |f| / step. Components larger than 1e4 times that floor are
/// compared relatively; the rest are compared against the floor itself.
struct GradientCheck {
    double max_relative_error = 0.0; // |a - n| / max(|a|, |n|), resolved components
    double max_noise_ratio = 0.0;    // |a - n| / floor, unresolved components
    int resolved = 0;
    int unresolved = 0;

    bool passed(double relative_tolerance, double noise_tolerance = 4.0) const
    {
        return max_relative_error < relative_tolerance && max_noise_ratio <= noise_tolerance;
    }
};

GradientCheck check_gradient(const Objective& objective, const Eigen::VectorXd& x, double step);

/// Starting point for a solve: per-frame pose and camera from the initial
/// estimate, shape averaged over frames.
SequenceSolution solution_from_initial_estimate(const InitialEstimate& init);

struct SequenceFit {
    SequenceSolution solution;
    SolveReport report;
};

/// Jointly minimises the total energy over all frames, starting from the
/// problem's initial estimate.
SequenceFit optimize_sequence(const SequenceProblem& problem, const SolverConfig& config = {});

/// Same, starting from an explicit solution.
SequenceFit optimize_sequence(const SequenceProblem& problem, const SequenceSolution& start,
                              const SolverConfig& config = {});

} // namespace pose_ba
