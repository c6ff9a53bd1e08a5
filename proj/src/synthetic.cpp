#include "pose_ba/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace pose_ba {

namespace {

// Joint indices of the default 24-joint tree.
enum Joint {
    kLeftHip = 1, kRightHip = 2, kSpine1 = 3, kLeftKnee = 4, kRightKnee = 5, kSpine2 = 6,
    kSpine3 = 9, kNeck = 12, kLeftShoulder = 16, kRightShoulder = 17, kLeftElbow = 18, kRightElbow = 19
};

constexpr int kModes = 8;
constexpr double kModeSpread = 0.12;    // radians, per angle around a mode
constexpr double kMaxSwing = 0.25;      // radians, sinusoid amplitude cap
constexpr double kRootYawRange = 0.8;

// Non-root angle vector indexing: joint j, axis a.
void set_angle(Eigen::VectorXd& v, int joint, int axis, double value)
{
    const Eigen::Index i = 3 * (joint - 1) + axis;
    if (i < v.size()) {
        v[i] = value;
    }
}

// Eight activity archetypes (standing, walking, arms up, squat, reaching,
// bending, elbows bent, lunge). Y is up and the body faces +Z.
std::array<Eigen::VectorXd, kModes> activity_modes(int joint_count)
{
    const int dim = 3 * (joint_count - 1);
    Eigen::VectorXd base = Eigen::VectorXd::Zero(dim);
    if (joint_count == kDefaultJointCount) {
        set_angle(base, kLeftShoulder, 2, -1.2);
        set_angle(base, kRightShoulder, 2, 1.2);
    }
    std::array<Eigen::VectorXd, kModes> modes;
    modes.fill(base);
    if (joint_count != kDefaultJointCount) {
        return modes;
    }
    set_angle(modes[1], kLeftHip, 0, -0.4);
    set_angle(modes[1], kRightHip, 0, 0.3);
    set_angle(modes[1], kRightKnee, 0, 0.5);
    set_angle(modes[2], kLeftShoulder, 2, -0.2);
    set_angle(modes[2], kRightShoulder, 2, 0.2);
    set_angle(modes[3], kLeftHip, 0, -1.2);
    set_angle(modes[3], kRightHip, 0, -1.2);
    set_angle(modes[3], kLeftKnee, 0, 1.6);
    set_angle(modes[3], kRightKnee, 0, 1.6);
    set_angle(modes[4], kLeftShoulder, 1, -1.3);
    set_angle(modes[4], kRightShoulder, 1, 1.3);
    set_angle(modes[4], kLeftShoulder, 2, 0.0);
    set_angle(modes[4], kRightShoulder, 2, 0.0);
    set_angle(modes[5], kSpine1, 0, 0.4);
    set_angle(modes[5], kSpine2, 0, 0.3);
    set_angle(modes[5], kSpine3, 0, 0.2);
    set_angle(modes[5], kNeck, 0, -0.3);
    set_angle(modes[6], kLeftElbow, 1, -1.2);
    set_angle(modes[6], kRightElbow, 1, 1.2);
    set_angle(modes[7], kLeftHip, 0, -0.8);
    set_angle(modes[7], kLeftKnee, 0, 0.9);
    set_angle(modes[7], kRightHip, 0, 0.3);
    return modes;
}

struct Motion {
    Eigen::VectorXd base;      // 3J, root included
    Eigen::VectorXd amplitude; // 3J
    Eigen::VectorXd frequency; // radians per frame
    Eigen::VectorXd phase;

    Pose at(int t) const
    {
        return base + amplitude.cwiseProduct((frequency * static_cast<double>(t) + phase).array().sin().matrix());
    }
};

Eigen::VectorXd gaussian_vector(std::mt19937_64& rng, Eigen::Index n, double sigma)
{
    std::normal_distribution<double> normal(0.0, sigma);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = normal(rng);
    }
    return v;
}

Motion draw_motion(std::mt19937_64& rng, int joint_count, double motion_amplitude)
{
    const int dim = 3 * joint_count;
    const auto modes = activity_modes(joint_count);
    std::uniform_int_distribution<int> pick_mode(0, kModes - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Motion m;
    m.base.resize(dim);
    m.base.tail(dim - 3) = modes[static_cast<std::size_t>(pick_mode(rng))] + gaussian_vector(rng, dim - 3, kModeSpread);
    m.base.head<3>() = Vec3(0.0, kRootYawRange * (2.0 * unit(rng) - 1.0), 0.0);
    m.amplitude.resize(dim);
    m.frequency.resize(dim);
    m.phase.resize(dim);
    for (int i = 0; i < dim; ++i) {
        const double cap = i < 3 ? 0.3 * kMaxSwing : kMaxSwing;
        m.amplitude[i] = motion_amplitude * cap * unit(rng);
        m.frequency[i] = 0.15 + 0.35 * unit(rng);
        m.phase[i] = 2.0 * std::numbers::pi * unit(rng);
    }
    return m;
}

} // namespace

void SynthConfig::validate() const
{
    if (frames < 1) {
        throw ValidationError("synth config: frames must be >= 1");
    }
    if (people < 1 || static_cast<std::size_t>(people) > kMaxPeoplePerFrame) {
        throw ValidationError("synth config: people must lie in [1, 6]");
    }
    if (!(detection_noise >= 0.0)) {
        throw ValidationError("synth config: detection noise must be >= 0");
    }
    for (double rate : {outlier_rate, miss_rate}) {
        if (!(rate >= 0.0 && rate <= 1.0)) {
            throw ValidationError("synth config: rates must lie in [0, 1]");
        }
    }
    if (!(init_theta_noise >= 0.0 && init_beta_noise >= 0.0 && init_camera_noise >= 0.0 && motion_amplitude >= 0.0)) {
        throw ValidationError("synth config: noise levels and amplitudes must be >= 0");
    }
    if (!(image_width > 0.0 && image_height > 0.0)) {
        throw ValidationError("synth config: image size must be positive");
    }
}

Eigen::VectorXd sample_synthetic_angles(std::mt19937_64& rng, int joint_count, double motion_amplitude)
{
    const Motion m = draw_motion(rng, joint_count, motion_amplitude);
    std::uniform_int_distribution<int> frame(0, 1000);
    return m.at(frame(rng)).tail(3 * (joint_count - 1));
}

GmmPrior fit_synthetic_prior(const BodyModel& model, int samples, unsigned seed, int components)
{
    std::mt19937_64 rng(seed);
    const int dim = 3 * (model.joint_count() - 1);
    Eigen::MatrixXd data(samples, dim);
    for (int s = 0; s < samples; ++s) {
        data.row(s) = sample_synthetic_angles(rng, model.joint_count()).transpose();
    }
    return fit_gmm_em(data, components, 40, seed);
}

SequenceFile generate_synthetic_sequence(const SynthConfig& config, const BodyModel& model)
{
    config.validate();
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int joints = model.joint_count();
    const int frames = config.frames;

    GroundTruth gt;
    for (int k = 0; k < kShapeDim; ++k) {
        gt.beta[k] = std::clamp(0.7 * normal(rng), -2.5, 2.5);
    }
    const Motion motion = draw_motion(rng, joints, config.motion_amplitude);

    const double scale0 = 0.55 * config.image_height / 1.7;
    const Vec2 center(0.5 * config.image_width, 0.5 * config.image_height);
    const double cam_freq_x = 0.05 + 0.1 * unit(rng);
    const double cam_freq_y = 0.05 + 0.1 * unit(rng);
    const double cam_phase = 2.0 * std::numbers::pi * unit(rng);
    for (int t = 0; t < frames; ++t) {
        gt.thetas.push_back(motion.at(t));
        CameraParams cam;
        cam.scale = scale0 * (1.0 + 0.03 * (config.camera_motion > 0.0 ? std::sin(0.07 * t + cam_phase) : 0.0));
        cam.translation = center + config.camera_motion * Vec2(std::sin(cam_freq_x * t + cam_phase),
                                                               0.5 * std::sin(cam_freq_y * t));
        gt.cameras.push_back(cam);
        gt.joints.push_back(forward_kinematics(model, gt.beta, gt.thetas.back()));
    }

    SequenceFile seq;
    seq.video_id = config.video_id;
    seq.image_width = config.image_width;
    seq.image_height = config.image_height;
    seq.frames.resize(static_cast<std::size_t>(frames));
    std::vector<std::vector<PersonEstimate>> estimates(static_cast<std::size_t>(frames));

    auto in_image = [&](const Eigen::RowVector2d& p) {
        return p.x() >= 0.0 && p.x() <= config.image_width && p.y() >= 0.0 && p.y() <= config.image_height;
    };

    for (int t = 0; t < frames; ++t) {
        const auto ut = static_cast<std::size_t>(t);
        const bool missing = unit(rng) < config.miss_rate;
        const Joints2 clean = project(gt.joints[ut], gt.cameras[ut]);

        PersonEstimate subject;
        subject.beta = gt.beta + config.init_beta_noise * gaussian_vector(rng, kShapeDim, 1.0);
        subject.theta = gt.thetas[ut] + gaussian_vector(rng, model.pose_dim(), config.init_theta_noise);
        subject.camera.scale = gt.cameras[ut].scale * std::exp(config.init_camera_noise * normal(rng));
        subject.camera.translation =
            gt.cameras[ut].translation + config.init_camera_noise * gt.cameras[ut].scale * Vec2(normal(rng), normal(rng));

        for (int p = 0; p < config.people; ++p) {
            if (p == 0 && missing) {
                continue;
            }
            // distractors alternate right/left of the subject
            const double side = p % 2 == 1 ? 1.0 : -1.0;
            const double shift = p == 0 ? 0.0 : side * config.distractor_offset * ((p + 1) / 2);
            Detection det;
            det.keypoints.resize(joints, 2);
            det.confidence = Eigen::VectorXd::Ones(joints);
            for (int i = 0; i < joints; ++i) {
                Eigen::RowVector2d kp = clean.row(i);
                kp.x() += shift;
                if (unit(rng) < config.outlier_rate) {
                    kp = Eigen::RowVector2d(config.image_width * unit(rng), config.image_height * unit(rng));
                }
                else {
                    kp += config.detection_noise * Eigen::RowVector2d(normal(rng), normal(rng));
                }
                det.keypoints.row(i) = kp;
                if (!in_image(kp)) {
                    det.confidence[i] = 0.0;
                }
            }
            seq.frames[ut].people.push_back(std::move(det));
            PersonEstimate est = subject;
            est.camera.translation.x() += shift;
            estimates[ut].push_back(std::move(est));
        }
    }
    seq.estimates = std::move(estimates);
    seq.ground_truth = std::move(gt);
    return seq;
}

} // namespace pose_ba
