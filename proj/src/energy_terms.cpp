#include "energy_detail.hpp"

#include "pose_ba/packing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pose_ba {

// ---------------------------------------------------------------- config ---

EnergyConfig EnergyConfig::h36m()
{
    return EnergyConfig{};
}

EnergyConfig EnergyConfig::kinetics()
{
    EnergyConfig c;
    c.lambda_R = 1e-3;
    c.lambda_I = 0.2;
    c.lambda_beta = 0.05;
    c.lambda_J = 1e-4;
    c.lambda_1 = 0.2;
    c.lambda_2 = 1e-3;
    c.lambda_3 = 20.0;
    c.tau_R = 50.0;
    c.tau_I = 2e-2;
    c.robust_mode = true;
    c.penalize_camera_scale = false;
    return c;
}

EnergyConfig EnergyConfig::with_terms(std::string_view terms) const
{
    for (const char ch : terms) {
        if (ch != 'R' && ch != 'P' && ch != 'T') {
            throw ValidationError(std::string("unknown energy term '") + ch + "' (expected R, P or T)");
        }
    }
    auto has = [&](char ch) { return terms.find(ch) != std::string_view::npos; };
    EnergyConfig c = *this;
    if (!has('R')) {
        c.lambda_R = 0.0;
    }
    if (!has('P')) {
        c.lambda_I = 0.0;
        c.lambda_J = 0.0;
    }
    if (!has('T')) {
        c.lambda_1 = 0.0;
        c.lambda_2 = 0.0;
        c.lambda_3 = 0.0;
    }
    return c;
}

void EnergyConfig::validate() const
{
    const std::pair<const char*, double> weights[] = {
        {"lambda_R", lambda_R}, {"lambda_I", lambda_I}, {"lambda_beta", lambda_beta}, {"lambda_J", lambda_J},
        {"lambda_1", lambda_1}, {"lambda_2", lambda_2}, {"lambda_3", lambda_3}};
    for (const auto& [name, value] : weights) {
        if (!std::isfinite(value) || value < 0.0) {
            throw ValidationError(std::string("energy config: ") + name + " must be finite and >= 0");
        }
    }
    if (!(huber_delta > 0.0) || !std::isfinite(huber_delta)) {
        throw ValidationError("energy config: huber_delta must be positive");
    }
    if (!(hinge_margin >= 0.0)) {
        throw ValidationError("energy config: hinge_margin must be >= 0");
    }
    if (!(camera_translation_bound_fraction >= 0.0)) {
        throw ValidationError("energy config: camera_translation_bound_fraction must be >= 0");
    }
    if (robust_mode) {
        if (!(tau_R > 0.0) || !(tau_I > 0.0)) {
            throw ValidationError("energy config: tau_R and tau_I must be positive in robust mode");
        }
        if (!(image_width > 0.0)) {
            throw ValidationError("energy config: robust mode needs image_width to bound camera translation");
        }
    }
}

InitialEstimate make_initial_estimate(const BodyModel& model, std::vector<Shape> betas, std::vector<Pose> thetas,
                                      std::vector<CameraParams> cameras)
{
    if (betas.size() != thetas.size() || cameras.size() != thetas.size()) {
        throw ValidationError("initial estimate: betas, thetas and cameras must have one entry per frame");
    }
    InitialEstimate init{std::move(betas), std::move(thetas), std::move(cameras), {}};
    init.joints.reserve(init.thetas.size());
    for (std::size_t t = 0; t < init.thetas.size(); ++t) {
        init.joints.push_back(forward_kinematics(model, init.betas[t], init.thetas[t]));
    }
    return init;
}

void SequenceProblem::validate() const
{
    config.validate();
    const int frames_n = frame_count();
    const int joints = model.joint_count();
    if (frames_n < 1) {
        throw ValidationError("sequence problem: at least one frame is required");
    }
    if (init.frame_count() != frames_n || static_cast<int>(init.betas.size()) != frames_n ||
        static_cast<int>(init.cameras.size()) != frames_n || static_cast<int>(init.joints.size()) != frames_n) {
        throw ValidationError("sequence problem: initial estimate has " + std::to_string(init.frame_count()) +
                              " frames, detections have " + std::to_string(frames_n));
    }
    if (prior.dim() != 3 * (joints - 1)) {
        throw ValidationError("sequence problem: prior dimension " + std::to_string(prior.dim()) +
                              " does not match " + std::to_string(3 * (joints - 1)) + " non-root angles");
    }
    for (int t = 0; t < frames_n; ++t) {
        const auto ut = static_cast<std::size_t>(t);
        const auto& people = frames[ut].people;
        if (people.size() > kMaxPeoplePerFrame) {
            throw ValidationError("frame " + std::to_string(t) + ": more than " +
                                  std::to_string(kMaxPeoplePerFrame) + " people");
        }
        if (!config.robust_mode && people.size() > 1) {
            throw ValidationError("frame " + std::to_string(t) +
                                  ": several people need robust_mode; track a single person first");
        }
        for (const auto& det : people) {
            if (det.keypoints.rows() != joints || det.confidence.size() != joints) {
                throw ValidationError("frame " + std::to_string(t) + ": detection must have " +
                                      std::to_string(joints) + " joints");
            }
            if ((det.confidence.array() < 0.0).any() || (det.confidence.array() > 1.0).any()) {
                throw ValidationError("frame " + std::to_string(t) + ": confidences must lie in [0, 1]");
            }
        }
        if (init.thetas[ut].size() != model.pose_dim() || init.joints[ut].rows() != joints) {
            throw ValidationError("frame " + std::to_string(t) + ": initial estimate has wrong dimensions");
        }
    }
}

// ---------------------------------------------------------------- losses ---

double huber(double r, double delta)
{
    r = std::abs(r);
    return r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
}

double huber(const Eigen::Ref<const Eigen::VectorXd>& residual, double delta)
{
    return huber(residual.norm(), delta);
}

double hinge(double r, double margin, double delta)
{
    r = std::abs(r);
    return r <= margin ? 0.0 : huber(r - margin, delta);
}

double hinge(const Vec2& residual, double margin, double delta)
{
    return hinge(residual.norm(), margin, delta);
}

// ------------------------------------------------------- frame primitives ---

namespace detail {

double person_reprojection(const Joints2& x, const Detection& det, const EnergyConfig& config, bool use_hinge,
                           Joints2* grad)
{
    if (grad) {
        grad->setZero(x.rows(), 2);
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double w = det.confidence[i];
        if (w == 0.0) {
            continue;
        }
        const Vec2 r = (x.row(i) - det.keypoints.row(i)).transpose();
        Vec2 g;
        const double loss = use_hinge ? hinge_norm(r, config.hinge_margin, config.huber_delta, grad ? &g : nullptr)
                                      : huber_norm<2>(r, config.huber_delta, grad ? &g : nullptr);
        sum += w * loss;
        if (grad) {
            grad->row(i) = w * g.transpose();
        }
    }
    return sum;
}

double frame_reprojection(const Joints2& x, const FrameDetections& frame, const EnergyConfig& config,
                          Joints2* grad_x)
{
    if (config.lambda_R == 0.0) {
        return 0.0;
    }
    if (!config.robust_mode) {
        if (frame.people.empty()) {
            return 0.0;
        }
        if (frame.people.size() > 1) {
            throw ValidationError("reprojection: several people in a frame need robust_mode");
        }
        Joints2 g;
        const double e = person_reprojection(x, frame.people.front(), config, false, grad_x ? &g : nullptr);
        if (grad_x) {
            *grad_x += config.lambda_R * g;
        }
        return config.lambda_R * e;
    }

    // Inner min over people (ties keep the lowest index), outer min with tau_R.
    double best = std::numeric_limits<double>::infinity();
    Joints2 best_grad;
    Joints2 g;
    for (const auto& det : frame.people) {
        const double e = person_reprojection(x, det, config, true, grad_x ? &g : nullptr);
        if (e < best) {
            best = e;
            if (grad_x) {
                best_grad = g;
            }
        }
    }
    if (!(best < config.tau_R)) {
        return config.lambda_R * config.tau_R;
    }
    if (grad_x) {
        *grad_x += config.lambda_R * best_grad;
    }
    return config.lambda_R * best;
}

double frame_init_prior(const Joints3& joints, const Joints3& init_joints, const Shape& beta,
                        const Shape& init_beta, const EnergyConfig& config, Joints3* grad_joints,
                        Shape* grad_beta)
{
    if (config.lambda_I == 0.0) {
        return 0.0;
    }
    const bool want_grad = grad_joints != nullptr;
    Joints3 gj;
    if (want_grad) {
        gj.setZero(joints.rows(), 3);
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < joints.rows(); ++i) {
        const Vec3 r = (joints.row(i) - init_joints.row(i)).transpose();
        Vec3 g;
        sum += huber_norm<3>(r, config.huber_delta, want_grad ? &g : nullptr);
        if (want_grad) {
            gj.row(i) = g.transpose();
        }
    }
    Shape gb;
    sum += config.lambda_beta * huber_norm<kShapeDim>(beta - init_beta, config.huber_delta, want_grad ? &gb : nullptr);

    if (config.robust_mode && !(sum < config.tau_I)) {
        return config.lambda_I * config.tau_I;
    }
    if (want_grad) {
        *grad_joints += config.lambda_I * gj;
        *grad_beta += (config.lambda_I * config.lambda_beta) * gb;
    }
    return config.lambda_I * sum;
}

double frame_joint_prior(const Pose& theta, const GmmPrior& prior, const EnergyConfig& config,
                         Eigen::VectorXd* grad_theta)
{
    if (config.lambda_J == 0.0) {
        return 0.0;
    }
    const auto angles = theta.tail(theta.size() - 3);
    if (!grad_theta) {
        return config.lambda_J * (prior.negative_log_likelihood(angles) - prior.nll_floor());
    }
    Eigen::VectorXd g(angles.size());
    const double nll = prior.negative_log_likelihood(angles, g) - prior.nll_floor();
    grad_theta->tail(angles.size()) += config.lambda_J * g;
    return config.lambda_J * nll;
}

double pair_temporal(const Joints3& prev_joints, const Joints3& joints, const Joints2& prev_x, const Joints2& x,
                     const CameraParams& prev_camera, const CameraParams& camera, const EnergyConfig& config,
                     PairGradient* grad)
{
    const Eigen::Index n = joints.rows();
    if (grad) {
        grad->joints.setZero(n, 3);
        grad->projections.setZero(n, 2);
        grad->camera.setZero();
    }
    double e3 = 0.0;
    double e2 = 0.0;
    if (config.lambda_1 != 0.0) {
        for (Eigen::Index i = 0; i < n; ++i) {
            Vec3 g;
            e3 += huber_norm<3>((joints.row(i) - prev_joints.row(i)).transpose(), config.huber_delta,
                                grad ? &g : nullptr);
            if (grad) {
                grad->joints.row(i) = config.lambda_1 * g.transpose();
            }
        }
    }
    if (config.lambda_2 != 0.0) {
        for (Eigen::Index i = 0; i < n; ++i) {
            Vec2 g;
            e2 += huber_norm<2>((x.row(i) - prev_x.row(i)).transpose(), config.huber_delta, grad ? &g : nullptr);
            if (grad) {
                grad->projections.row(i) = config.lambda_2 * g.transpose();
            }
        }
    }
    double ec = 0.0;
    if (config.lambda_3 != 0.0) {
        const bool with_scale = config.penalize_camera_scale && !config.robust_mode;
        const double ds = with_scale ? camera.scale - prev_camera.scale : 0.0;
        const Vec2 du = camera.translation - prev_camera.translation;
        const double du_norm = du.norm();
        const double bound = config.camera_translation_bound_fraction * config.image_width;
        const bool clamped = config.robust_mode && du_norm > bound;
        const double du_eff = clamped ? bound : du_norm;
        const double r = std::sqrt(ds * ds + du_eff * du_eff);
        const double delta = config.huber_delta;
        ec = r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
        if (grad) {
            // d rho(r) / d v = (rho'(r) / r) v
            const double k = config.lambda_3 * (r <= delta ? 1.0 : delta / r);
            grad->camera[0] = k * ds;
            if (!clamped) {
                grad->camera.tail<2>() = k * du;
            }
        }
    }
    return config.lambda_1 * e3 + config.lambda_2 * e2 + config.lambda_3 * ec;
}

void pull_back_projection(const Joints3& joints, const CameraParams& camera, const Joints2& grad_x,
                          Joints3& grad_joints, Vec3& grad_camera)
{
    for (Eigen::Index i = 0; i < joints.rows(); ++i) {
        const double gx = grad_x(i, 0);
        const double gy = grad_x(i, 1);
        grad_joints(i, 0) += camera.scale * gx;
        grad_joints(i, 1) += camera.scale * gy;
        grad_camera[0] += gx * joints(i, 0) + gy * joints(i, 1);
        grad_camera[1] += gx;
        grad_camera[2] += gy;
    }
}

} // namespace detail

// --------------------------------------------------------- whole terms ---

namespace {

struct Kinematics {
    std::vector<Joints3> joints;
    std::vector<Joints2> projections;
};

Kinematics evaluate_kinematics(const BodyModel& model, const SequenceSolution& solution)
{
    Kinematics k;
    const auto n = static_cast<std::size_t>(solution.frame_count());
    if (solution.cameras.size() != n) {
        throw ValidationError("solution: one camera per frame is required");
    }
    k.joints.reserve(n);
    k.projections.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        k.joints.push_back(forward_kinematics(model, solution.beta, solution.thetas[t]));
        k.projections.push_back(project(k.joints.back(), solution.cameras[t]));
    }
    return k;
}

void require_frames(std::size_t expected, std::size_t actual, const char* what)
{
    if (expected != actual) {
        throw ValidationError(std::string(what) + ": solution has " + std::to_string(expected) +
                              " frames but input has " + std::to_string(actual));
    }
}

} // namespace

double reprojection_energy(const BodyModel& model, const SequenceSolution& solution,
                           std::span<const FrameDetections> frames, const EnergyConfig& config)
{
    require_frames(solution.thetas.size(), frames.size(), "reprojection_energy");
    EnergyConfig plain = config;
    plain.robust_mode = false;
    const auto kin = evaluate_kinematics(model, solution);
    double e = 0.0;
    for (std::size_t t = 0; t < frames.size(); ++t) {
        e += detail::frame_reprojection(kin.projections[t], frames[t], plain, nullptr);
    }
    return e;
}

double robust_reprojection_energy(const BodyModel& model, const SequenceSolution& solution,
                                  std::span<const FrameDetections> frames, const EnergyConfig& config)
{
    require_frames(solution.thetas.size(), frames.size(), "robust_reprojection_energy");
    EnergyConfig robust = config;
    robust.robust_mode = true;
    const auto kin = evaluate_kinematics(model, solution);
    double e = 0.0;
    for (std::size_t t = 0; t < frames.size(); ++t) {
        e += detail::frame_reprojection(kin.projections[t], frames[t], robust, nullptr);
    }
    return e;
}

double temporal_energy(const BodyModel& model, const SequenceSolution& solution, const EnergyConfig& config)
{
    const auto kin = evaluate_kinematics(model, solution);
    double e = 0.0;
    for (std::size_t t = 1; t < kin.joints.size(); ++t) {
        e += detail::pair_temporal(kin.joints[t - 1], kin.joints[t], kin.projections[t - 1], kin.projections[t],
                                   solution.cameras[t - 1], solution.cameras[t], config, nullptr);
    }
    return e;
}

double joint_angle_prior(const Pose& theta, const GmmPrior& prior)
{
    return prior.negative_log_likelihood(theta.tail(theta.size() - 3)) - prior.nll_floor();
}

double init_prior(const BodyModel& model, const SequenceSolution& solution, const InitialEstimate& init,
                  const EnergyConfig& config)
{
    require_frames(solution.thetas.size(), init.joints.size(), "init_prior");
    const auto kin = evaluate_kinematics(model, solution);
    double e = 0.0;
    for (std::size_t t = 0; t < kin.joints.size(); ++t) {
        e += detail::frame_init_prior(kin.joints[t], init.joints[t], solution.beta, init.betas[t], config, nullptr,
                                      nullptr);
    }
    return e;
}

EnergyBreakdown energy_terms(const SequenceProblem& problem, const SequenceSolution& solution)
{
    const auto& cfg = problem.config;
    EnergyBreakdown b;
    b.reprojection = cfg.robust_mode ? robust_reprojection_energy(problem.model, solution, problem.frames, cfg)
                                     : reprojection_energy(problem.model, solution, problem.frames, cfg);
    b.temporal = temporal_energy(problem.model, solution, cfg);
    if (cfg.lambda_J != 0.0) {
        for (const auto& theta : solution.thetas) {
            b.joint_prior += cfg.lambda_J * joint_angle_prior(theta, problem.prior);
        }
    }
    b.init_prior = init_prior(problem.model, solution, problem.init, cfg);
    return b;
}

double total_energy(const SequenceProblem& problem, const SequenceSolution& solution)
{
    return energy_terms(problem, solution).total();
}

double trajectory_length(const BodyModel& model, const SequenceSolution& solution)
{
    double length = 0.0;
    Joints3 prev;
    for (int t = 0; t < solution.frame_count(); ++t) {
        Joints3 cur = forward_kinematics(model, solution.beta, solution.thetas[static_cast<std::size_t>(t)]);
        if (t > 0) {
            length += (cur - prev).rowwise().norm().sum();
        }
        prev = std::move(cur);
    }
    return length;
}

double normalized_energy(const BodyModel& model, const SequenceSolution& solution, double total)
{
    if (solution.frame_count() < 2) {
        throw ValidationError("normalized_energy: needs at least two frames");
    }
    constexpr double kMinTrajectory = 1e-6; // meters
    return total / std::max(kMinTrajectory, trajectory_length(model, solution));
}

Eigen::VectorXd energy_gradient(const SequenceProblem& problem, const SequenceSolution& solution)
{
    const Eigen::VectorXd packed = pack(solution);
    Eigen::VectorXd grad(packed.size());
    EnergyEvaluator evaluator(problem);
    const double e = evaluator(packed, grad);
    if (!std::isfinite(e)) {
        throw ValidationError("energy_gradient: energy is not finite at this point");
    }
    return grad;
}

} // namespace pose_ba
