#include "energy_detail.hpp"

#include "pose_ba/packing.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pose_ba {

struct EnergyEvaluator::FrameScratch {
    KinematicState state;
    Joints2 x;
    Joints3 g_joints;
    Joints2 g_x;
    Vec3 g_camera;
    Eigen::VectorXd g_theta;
    Shape g_beta;
    double frame_energy = 0.0;

    // temporal pair (t-1, t); unused for t = 0
    detail::PairGradient pair;
    double pair_energy = 0.0;
};

EnergyEvaluator::EnergyEvaluator(const SequenceProblem& problem)
    : problem_(problem), frames_(static_cast<std::size_t>(problem.frame_count()))
{
    problem_.validate();
    const int joints = problem_.model.joint_count();
    for (auto& f : frames_) {
        f.g_joints.resize(joints, 3);
        f.g_x.resize(joints, 2);
        f.g_theta.resize(problem_.model.pose_dim());
    }
}

EnergyEvaluator::~EnergyEvaluator() = default;

double EnergyEvaluator::operator()(const Eigen::Ref<const Eigen::VectorXd>& packed, Eigen::Ref<Eigen::VectorXd> grad)
{
    Eigen::VectorXd g(packed.size());
    const double e = evaluate(packed, &g);
    grad = g;
    return e;
}

double EnergyEvaluator::value(const Eigen::Ref<const Eigen::VectorXd>& packed)
{
    return evaluate(packed, nullptr);
}

double EnergyEvaluator::evaluate(const Eigen::Ref<const Eigen::VectorXd>& packed, Eigen::VectorXd* grad)
{
    const auto& model = problem_.model;
    const auto& cfg = problem_.config;
    const int frames = problem_.frame_count();
    const int joints = model.joint_count();
    const int pose_dim = model.pose_dim();
    const bool want_grad = grad != nullptr;
    const auto solution = unpack(packed, frames, joints);

    // Pass 1: kinematics and the terms local to one frame.
#pragma omp parallel for schedule(static)
    for (int t = 0; t < frames; ++t) {
        const auto ut = static_cast<std::size_t>(t);
        auto& f = frames_[ut];
        forward_kinematics(model, solution.beta, solution.thetas[ut], f.state);
        f.x = project(f.state.positions, solution.cameras[ut]);
        f.g_joints.setZero();
        f.g_x.setZero();
        f.g_camera.setZero();
        f.g_theta.setZero();
        f.g_beta.setZero();
        double e = detail::frame_reprojection(f.x, problem_.frames[ut], cfg, want_grad ? &f.g_x : nullptr);
        e += detail::frame_init_prior(f.state.positions, problem_.init.joints[ut], solution.beta,
                                      problem_.init.betas[ut], cfg, want_grad ? &f.g_joints : nullptr,
                                      want_grad ? &f.g_beta : nullptr);
        e += detail::frame_joint_prior(solution.thetas[ut], problem_.prior, cfg, want_grad ? &f.g_theta : nullptr);
        f.frame_energy = e;
    }

    // Pass 2: temporal pairs. Each pair writes only into its own slot.
#pragma omp parallel for schedule(static)
    for (int t = 1; t < frames; ++t) {
        const auto ut = static_cast<std::size_t>(t);
        auto& f = frames_[ut];
        const auto& p = frames_[ut - 1];
        f.pair_energy = detail::pair_temporal(p.state.positions, f.state.positions, p.x, f.x, solution.cameras[ut - 1],
                                              solution.cameras[ut], cfg, want_grad ? &f.pair : nullptr);
    }

    // Ordered reduction keeps the sum independent of the thread count.
    double energy = 0.0;
    for (int t = 0; t < frames; ++t) {
        const auto& f = frames_[static_cast<std::size_t>(t)];
        energy += f.frame_energy;
        if (t > 0) {
            energy += f.pair_energy;
        }
    }
    if (!want_grad) {
        return energy;
    }

    // Pass 3: gather pair gradients and pull back through projection and
    // kinematics; every frame writes a disjoint block of the gradient.
    auto& g = *grad;
#pragma omp parallel for schedule(static)
    for (int t = 0; t < frames; ++t) {
        const auto ut = static_cast<std::size_t>(t);
        auto& f = frames_[ut];
        if (t > 0) {
            f.g_joints += f.pair.joints;
            f.g_x += f.pair.projections;
            f.g_camera += f.pair.camera;
        }
        if (t + 1 < frames) {
            const auto& next = frames_[ut + 1].pair;
            f.g_joints -= next.joints;
            f.g_x -= next.projections;
            f.g_camera -= next.camera;
        }
        detail::pull_back_projection(f.state.positions, solution.cameras[ut], f.g_x, f.g_joints, f.g_camera);
        backpropagate(model, f.state, f.g_joints, f.g_theta, f.g_beta);
        const auto off = frame_offset(t, joints);
        g.segment(off, pose_dim) = f.g_theta;
        g[off + pose_dim] = solution.cameras[ut].scale * f.g_camera[0];
        g.segment<2>(off + pose_dim + 1) = f.g_camera.tail<2>();
    }

    Shape g_beta = Shape::Zero();
    for (const auto& f : frames_) {
        g_beta += f.g_beta;
    }
    g.head<kShapeDim>() = g_beta;
    return energy;
}

void set_thread_count(int threads)
{
#ifdef _OPENMP
    if (threads > 0) {
        omp_set_num_threads(threads);
    }
#else
    (void)threads;
#endif
}

int thread_count()
{
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace pose_ba
