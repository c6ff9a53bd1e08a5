#pragma once

// Shared builders for random energy instances used by the unit and
// acceptance tests.

#include "pose_ba/energy.hpp"
#include "pose_ba/packing.hpp"
#include "pose_ba/tracking.hpp"

#include <limits>
#include <random>

namespace fixtures {

using namespace pose_ba;

inline Eigen::VectorXd normal_vector(std::mt19937_64& rng, Eigen::Index n, double sigma)
{
    std::normal_distribution<double> d(0.0, sigma);
    return Eigen::VectorXd::NullaryExpr(n, [&] { return d(rng); });
}

inline SequenceSolution random_solution(std::mt19937_64& rng, const BodyModel& model, int frames)
{
    SequenceSolution s;
    s.beta = normal_vector(rng, kShapeDim, 0.7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < frames; ++t) {
        s.thetas.push_back(normal_vector(rng, model.pose_dim(), 0.3));
        s.cameras.push_back({120.0 * std::exp(0.1 * u(rng)), Vec2(200.0 + 20.0 * u(rng), 200.0 + 20.0 * u(rng))});
    }
    return s;
}

/// One detection per frame near the projection of `truth`, with some
/// joints masked out.
inline Detection noisy_detection(std::mt19937_64& rng, const BodyModel& model, const SequenceSolution& truth, int t,
                                 double noise, double mask_rate = 0.1)
{
    const auto ut = static_cast<std::size_t>(t);
    Detection d;
    d.keypoints = project(forward_kinematics(model, truth.beta, truth.thetas[ut]), truth.cameras[ut]);
    std::normal_distribution<double> n(0.0, noise);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    d.confidence.resize(model.joint_count());
    for (int i = 0; i < model.joint_count(); ++i) {
        d.keypoints(i, 0) += n(rng);
        d.keypoints(i, 1) += n(rng);
        d.confidence[i] = u(rng) < mask_rate ? 0.0 : 0.3 + 0.7 * u(rng);
    }
    return d;
}

/// Detections from a hidden truth; the initial estimate is that truth
/// plus noise. Returns the problem and a random evaluation point.
struct Instance {
    SequenceProblem problem;
    SequenceSolution point;
};

inline Instance random_instance(unsigned seed, int frames, const EnergyConfig& config, const GmmPrior& prior,
                                const BodyModel& model = default_body_model(), double noise = 8.0)
{
    std::mt19937_64 rng(seed);
    const SequenceSolution truth = random_solution(rng, model, frames);
    std::vector<FrameDetections> dets(static_cast<std::size_t>(frames));
    for (int t = 0; t < frames; ++t) {
        dets[static_cast<std::size_t>(t)].people.push_back(noisy_detection(rng, model, truth, t, noise));
    }
    std::vector<Shape> betas;
    std::vector<Pose> thetas;
    std::vector<CameraParams> cams;
    for (int t = 0; t < frames; ++t) {
        betas.push_back(truth.beta + normal_vector(rng, kShapeDim, 0.2));
        thetas.push_back(truth.thetas[static_cast<std::size_t>(t)] + normal_vector(rng, model.pose_dim(), 0.1));
        cams.push_back(truth.cameras[static_cast<std::size_t>(t)]);
    }
    SequenceProblem problem{model, prior, config, std::move(dets),
                            make_initial_estimate(model, std::move(betas), std::move(thetas), std::move(cams))};
    SequenceSolution point = truth;
    point.beta += normal_vector(rng, kShapeDim, 0.3);
    for (int t = 0; t < frames; ++t) {
        const auto ut = static_cast<std::size_t>(t);
        point.thetas[ut] += normal_vector(rng, model.pose_dim(), 0.15);
        point.cameras[ut].scale *= std::exp(0.05 * normal_vector(rng, 1, 1.0)[0]);
        point.cameras[ut].translation += normal_vector(rng, 2, 5.0);
    }
    return {std::move(problem), std::move(point)};
}

// Independent path cost: squared distances written out again, penalties only
// between the first and last occupied frames, endpoints mandatory.
inline double oracle_track_cost(const std::vector<FrameDetections>& frames, const std::vector<int>& sel, double penalty)
{
    int first = -1;
    int last = -1;
    for (int t = 0; t < static_cast<int>(frames.size()); ++t) {
        if (!frames[static_cast<std::size_t>(t)].people.empty()) {
            first = first < 0 ? t : first;
            last = t;
        }
    }
    if (sel[static_cast<std::size_t>(first)] < 0 || sel[static_cast<std::size_t>(last)] < 0) {
        return std::numeric_limits<double>::infinity();
    }
    double cost = 0.0;
    const Detection* prev = nullptr;
    for (int t = first; t <= last; ++t) {
        const int p = sel[static_cast<std::size_t>(t)];
        if (p < 0) {
            cost += penalty;
            continue;
        }
        const Detection& cur = frames[static_cast<std::size_t>(t)].people[static_cast<std::size_t>(p)];
        if (prev) {
            double sum = 0.0;
            int n = 0;
            for (Eigen::Index i = 0; i < cur.keypoints.rows(); ++i) {
                if (prev->confidence[i] > 0 && cur.confidence[i] > 0) {
                    const double dx = prev->keypoints(i, 0) - cur.keypoints(i, 0);
                    const double dy = prev->keypoints(i, 1) - cur.keypoints(i, 1);
                    sum += dx * dx + dy * dy;
                    ++n;
                }
            }
            if (n == 0) {
                return std::numeric_limits<double>::infinity();
            }
            cost += sum / n;
        }
        prev = &cur;
    }
    return cost;
}

struct Enumerated {
    double best = std::numeric_limits<double>::infinity();
    double second = std::numeric_limits<double>::infinity();
    std::vector<int> selection;
};

inline Enumerated enumerate_tracks(const std::vector<FrameDetections>& frames, double penalty)
{
    Enumerated out;
    std::vector<int> sel(frames.size(), kSkip);
    auto rec = [&](auto&& self, std::size_t t) -> void {
        if (t == frames.size()) {
            const double c = oracle_track_cost(frames, sel, penalty);
            if (c < out.best) {
                out.second = out.best;
                out.best = c;
                out.selection = sel;
            }
            else if (c < out.second) {
                out.second = c;
            }
            return;
        }
        for (int p = -1; p < static_cast<int>(frames[t].people.size()); ++p) {
            sel[t] = p;
            self(self, t + 1);
        }
    };
    rec(rec, 0);
    return out;
}

} // namespace fixtures
