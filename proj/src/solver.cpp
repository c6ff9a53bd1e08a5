#include "pose_ba/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>

namespace pose_ba {

void SolverConfig::validate() const
{
    if (max_iterations < 0) {
        throw ValidationError("solver config: max_iterations must be >= 0");
    }
    if (memory < 1) {
        throw ValidationError("solver config: memory must be >= 1");
    }
    if (!(0.0 < c1 && c1 < c2 && c2 < 1.0)) {
        throw ValidationError("solver config: need 0 < c1 < c2 < 1");
    }
    if (!(gradient_tolerance >= 0.0) || !(function_tolerance >= 0.0)) {
        throw ValidationError("solver config: tolerances must be >= 0");
    }
    if (max_line_search_steps < 1) {
        throw ValidationError("solver config: max_line_search_steps must be >= 1");
    }
}

std::string to_string(Termination reason)
{
    switch (reason) {
    case Termination::converged:
        return "converged";
    case Termination::max_iterations:
        return "max-iter";
    case Termination::line_search_failure:
        return "line-search-failure";
    }
    return "unknown";
}

namespace {

struct TrialPoint {
    double alpha = 0.0;
    double f = 0.0;
    double slope = 0.0; // directional derivative g . d
    Eigen::VectorXd x;
    Eigen::VectorXd g;
};

class LineSearch {
public:
    LineSearch(const Objective& objective, const SolverConfig& config, int& evaluations)
        : objective_(objective), config_(config), evaluations_(evaluations)
    {
    }

    std::optional<TrialPoint> search(const Eigen::VectorXd& x, double f0, const Eigen::VectorXd& d, double slope0,
                                     double alpha_init)
    {
        x_ = &x;
        d_ = &d;
        f0_ = f0;
        slope0_ = slope0;
        steps_ = 0;

        if (auto p = strong_wolfe(alpha_init)) {
            return p;
        }
        // Fallback: halve until sufficient decrease.
        double alpha = alpha_init;
        for (int i = 0; i < config_.max_line_search_steps; ++i) {
            alpha *= 0.5;
            TrialPoint p = evaluate(alpha);
            if (armijo(p)) {
                return p;
            }
        }
        return std::nullopt;
    }

private:
    TrialPoint evaluate(double alpha)
    {
        TrialPoint p;
        p.alpha = alpha;
        p.x = *x_ + alpha * *d_;
        p.g.resize(p.x.size());
        p.f = objective_(p.x, p.g);
        ++evaluations_;
        ++steps_;
        p.slope = p.g.dot(*d_);
        if (!std::isfinite(p.f) || !p.g.allFinite()) {
            p.f = std::numeric_limits<double>::infinity();
            p.slope = std::numeric_limits<double>::quiet_NaN();
        }
        return p;
    }

    bool armijo(const TrialPoint& p) const { return p.f <= f0_ + config_.c1 * p.alpha * slope0_; }
    bool curvature(const TrialPoint& p) const { return std::abs(p.slope) <= -config_.c2 * slope0_; }

    std::optional<TrialPoint> strong_wolfe(double alpha)
    {
        TrialPoint prev;
        prev.alpha = 0.0;
        prev.f = f0_;
        prev.slope = slope0_;
        for (bool first = true; steps_ < config_.max_line_search_steps; first = false) {
            TrialPoint cur = evaluate(alpha);
            if (!armijo(cur) || (!first && cur.f >= prev.f)) {
                return zoom(std::move(prev), std::move(cur));
            }
            if (curvature(cur)) {
                return cur;
            }
            if (cur.slope >= 0.0) {
                return zoom(std::move(cur), std::move(prev));
            }
            prev = std::move(cur);
            alpha *= 2.0;
        }
        return std::nullopt;
    }

    // Minimiser of the cubic through (lo, hi) matching values and slopes,
    // safeguarded to stay well inside the bracket.
    static double cubic_step(const TrialPoint& lo, const TrialPoint& hi)
    {
        const double a = std::min(lo.alpha, hi.alpha);
        const double b = std::max(lo.alpha, hi.alpha);
        const double width = b - a;
        const double mid = 0.5 * (a + b);
        if (!std::isfinite(hi.f) || !std::isfinite(hi.slope)) {
            return mid;
        }
        const double d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (lo.alpha - hi.alpha);
        const double disc = d1 * d1 - lo.slope * hi.slope;
        if (!(disc >= 0.0)) {
            return mid;
        }
        const double d2 = std::copysign(std::sqrt(disc), hi.alpha - lo.alpha);
        const double denom = hi.slope - lo.slope + 2.0 * d2;
        if (denom == 0.0) {
            return mid;
        }
        const double step = hi.alpha - (hi.alpha - lo.alpha) * (hi.slope + d2 - d1) / denom;
        if (!std::isfinite(step) || step < a + 0.1 * width || step > b - 0.1 * width) {
            return mid;
        }
        return step;
    }

    std::optional<TrialPoint> zoom(TrialPoint lo, TrialPoint hi)
    {
        while (steps_ < config_.max_line_search_steps) {
            TrialPoint cur = evaluate(cubic_step(lo, hi));
            if (!armijo(cur) || cur.f >= lo.f) {
                hi = std::move(cur);
                continue;
            }
            if (curvature(cur)) {
                return cur;
            }
            if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) {
                hi = std::move(lo);
            }
            lo = std::move(cur);
        }
        // Out of budget: a point with sufficient decrease is still progress.
        if (lo.alpha > 0.0) {
            return lo;
        }
        return std::nullopt;
    }

    const Objective& objective_;
    const SolverConfig& config_;
    int& evaluations_;
    const Eigen::VectorXd* x_ = nullptr;
    const Eigen::VectorXd* d_ = nullptr;
    double f0_ = 0.0;
    double slope0_ = 0.0;
    int steps_ = 0;
};

// Two-loop recursion: returns -H g.
Eigen::VectorXd lbfgs_direction(const Eigen::VectorXd& g, const std::deque<Eigen::VectorXd>& s,
                                const std::deque<Eigen::VectorXd>& y)
{
    Eigen::VectorXd q = -g;
    const std::size_t m = s.size();
    std::vector<double> alpha(m);
    std::vector<double> rho(m);
    for (std::size_t j = m; j-- > 0;) {
        rho[j] = 1.0 / y[j].dot(s[j]);
        alpha[j] = rho[j] * s[j].dot(q);
        q -= alpha[j] * y[j];
    }
    if (m > 0) {
        q *= s[m - 1].dot(y[m - 1]) / y[m - 1].squaredNorm();
    }
    for (std::size_t j = 0; j < m; ++j) {
        const double beta = rho[j] * y[j].dot(q);
        q += (alpha[j] - beta) * s[j];
    }
    return q;
}

} // namespace

MinimizeResult lbfgs_minimize(const Objective& objective, Eigen::VectorXd x0, const SolverConfig& config)
{
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    MinimizeResult result;
    auto& report = result.report;

    Eigen::VectorXd x = std::move(x0);
    Eigen::VectorXd g(x.size());
    double f = objective(x, g);
    report.evaluations = 1;
    if (!std::isfinite(f) || !g.allFinite()) {
        throw SolverError("lbfgs: objective or gradient is not finite at the starting point");
    }
    report.initial_energy = f;
    report.energy_trace.push_back(f);
    report.termination = Termination::max_iterations;

    std::deque<Eigen::VectorXd> s_hist;
    std::deque<Eigen::VectorXd> y_hist;
    LineSearch line_search(objective, config, report.evaluations);

    auto grad_norm = [](const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; };

    if (grad_norm(g) <= config.gradient_tolerance) {
        report.termination = Termination::converged;
    }
    else {
        for (int k = 0; k < config.max_iterations; ++k) {
            Eigen::VectorXd d = lbfgs_direction(g, s_hist, y_hist);
            double slope = g.dot(d);
            if (!(slope < 0.0)) {
                s_hist.clear();
                y_hist.clear();
                d = -g;
                slope = -g.squaredNorm();
            }
            const double alpha0 = s_hist.empty() ? std::min(1.0, 1.0 / d.norm()) : 1.0;
            auto next = line_search.search(x, f, d, slope, alpha0);
            if (!next) {
                report.termination = Termination::line_search_failure;
                break;
            }
            Eigen::VectorXd s = next->x - x;
            Eigen::VectorXd y = next->g - g;
            const double sy = s.dot(y);
            if (sy > std::numeric_limits<double>::epsilon() * y.squaredNorm()) {
                s_hist.push_back(std::move(s));
                y_hist.push_back(std::move(y));
                if (static_cast<int>(s_hist.size()) > config.memory) {
                    s_hist.pop_front();
                    y_hist.pop_front();
                }
            }
            const double f_prev = f;
            x = std::move(next->x);
            g = std::move(next->g);
            f = next->f;
            report.energy_trace.push_back(f);
            report.iterations = k + 1;

            if (grad_norm(g) <= config.gradient_tolerance) {
                report.termination = Termination::converged;
                break;
            }
            if (f_prev - f <= config.function_tolerance * std::max(std::abs(f_prev), std::abs(f))) {
                report.termination = Termination::converged;
                break;
            }
        }
    }

    report.final_energy = f;
    report.final_gradient_norm = grad_norm(g);
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.x = std::move(x);
    return result;
}

GradientCheck check_gradient(const Objective& objective, const Eigen::VectorXd& x, double step)
{
    if (!(step > 0.0)) {
        throw ValidationError("check_gradient: step must be positive");
    }
    Eigen::VectorXd analytic(x.size());
    const double f = objective(x, analytic);
    const double floor = std::numeric_limits<double>::epsilon() * std::max(std::abs(f), 1e-300) / step;
    Eigen::VectorXd scratch(x.size());
    Eigen::VectorXd probe = x;
    GradientCheck check;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + step;
        const double fp = objective(probe, scratch);
        probe[i] = x[i] - step;
        const double fm = objective(probe, scratch);
        probe[i] = x[i];
        const double numeric = (fp - fm) / (2.0 * step);
        const double error = std::abs(analytic[i] - numeric);
        const double scale = std::max(std::abs(analytic[i]), std::abs(numeric));
        if (scale > 1e4 * floor) {
            check.max_relative_error = std::max(check.max_relative_error, error / scale);
            ++check.resolved;
        }
        else {
            check.max_noise_ratio = std::max(check.max_noise_ratio, error / floor);
            ++check.unresolved;
        }
    }
    return check;
}

SequenceSolution solution_from_initial_estimate(const InitialEstimate& init)
{
    if (init.frame_count() < 1) {
        throw ValidationError("initial estimate has no frames");
    }
    SequenceSolution s;
    s.beta.setZero();
    for (const auto& b : init.betas) {
        s.beta += b;
    }
    s.beta /= static_cast<double>(init.betas.size());
    s.thetas = init.thetas;
    s.cameras = init.cameras;
    return s;
}

SequenceFit optimize_sequence(const SequenceProblem& problem, const SolverConfig& config)
{
    return optimize_sequence(problem, solution_from_initial_estimate(problem.init), config);
}

SequenceFit optimize_sequence(const SequenceProblem& problem, const SequenceSolution& start,
                              const SolverConfig& config)
{
    EnergyEvaluator evaluator(problem);
    const int joints = problem.model.joint_count();
    const Eigen::VectorXd x0 = pack(start);
    // Translations are in pixels while every other variable moves image
    // points by roughly scale * meters per unit; optimise u / s instead.
    Eigen::VectorXd d = Eigen::VectorXd::Ones(x0.size());
    for (int t = 0; t < problem.frame_count(); ++t) {
        const Eigen::Index o = frame_offset(t, joints) + 3 * joints;
        d.segment(o + 1, 2).setConstant(start.cameras[static_cast<std::size_t>(t)].scale);
    }
    Eigen::VectorXd x(x0.size());
    const Objective objective = [&](const Eigen::VectorXd& y, Eigen::VectorXd& grad) {
        x = d.cwiseProduct(y);
        const double f = evaluator(x, grad);
        grad.array() *= d.array();
        return f;
    };
    auto result = lbfgs_minimize(objective, x0.cwiseQuotient(d), config);
    return {unpack(d.cwiseProduct(result.x), problem.frame_count(), joints), std::move(result.report)};
}

} // namespace pose_ba
