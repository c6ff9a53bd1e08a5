#include "energy_detail.hpp"

#include "pose_ba/packing.hpp"

namespace pose_ba::reference {

double energy_and_gradient(const SequenceProblem& problem, const Eigen::Ref<const Eigen::VectorXd>& packed,
                           Eigen::Ref<Eigen::VectorXd> grad)
{
    const auto& model = problem.model;
    const auto& cfg = problem.config;
    const int frames = problem.frame_count();
    const int joints = model.joint_count();
    const auto solution = unpack(packed, frames, joints);
    const auto n = static_cast<std::size_t>(frames);

    std::vector<KinematicState> states(n);
    std::vector<Joints2> x(n);
    for (std::size_t t = 0; t < n; ++t) {
        forward_kinematics(model, solution.beta, solution.thetas[t], states[t]);
        x[t] = project(states[t].positions, solution.cameras[t]);
    }

    std::vector<Joints3> g_joints(n, Joints3::Zero(joints, 3));
    std::vector<Joints2> g_x(n, Joints2::Zero(joints, 2));
    std::vector<Vec3> g_camera(n, Vec3::Zero());
    std::vector<Eigen::VectorXd> g_theta(n, Eigen::VectorXd::Zero(model.pose_dim()));
    Shape g_beta = Shape::Zero();

    double energy = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        energy += detail::frame_reprojection(x[t], problem.frames[t], cfg, &g_x[t]);
    }
    for (std::size_t t = 0; t < n; ++t) {
        energy += detail::frame_init_prior(states[t].positions, problem.init.joints[t], solution.beta,
                                           problem.init.betas[t], cfg, &g_joints[t], &g_beta);
    }
    for (std::size_t t = 0; t < n; ++t) {
        energy += detail::frame_joint_prior(solution.thetas[t], problem.prior, cfg, &g_theta[t]);
    }
    detail::PairGradient pair;
    for (std::size_t t = 1; t < n; ++t) {
        energy += detail::pair_temporal(states[t - 1].positions, states[t].positions, x[t - 1], x[t],
                                        solution.cameras[t - 1], solution.cameras[t], cfg, &pair);
        g_joints[t] += pair.joints;
        g_joints[t - 1] -= pair.joints;
        g_x[t] += pair.projections;
        g_x[t - 1] -= pair.projections;
        g_camera[t] += pair.camera;
        g_camera[t - 1] -= pair.camera;
    }

    grad.setZero();
    const int pose_dim = model.pose_dim();
    for (std::size_t t = 0; t < n; ++t) {
        detail::pull_back_projection(states[t].positions, solution.cameras[t], g_x[t], g_joints[t], g_camera[t]);
        backpropagate(model, states[t], g_joints[t], g_theta[t], g_beta);
        const auto off = frame_offset(static_cast<int>(t), joints);
        grad.segment(off, pose_dim) = g_theta[t];
        grad[off + pose_dim] = solution.cameras[t].scale * g_camera[t][0];
        grad.segment<2>(off + pose_dim + 1) = g_camera[t].tail<2>();
    }
    grad.head<kShapeDim>() = g_beta;
    return energy;
}

} // namespace pose_ba::reference
