#include "pose_ba/body_model.hpp"

#include <doctest.h>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include <cmath>
#include <numbers>
#include <random>

using namespace pose_ba;

namespace {

Vec3 random_vec3(std::mt19937_64& rng, double spread)
{
    std::uniform_real_distribution<double> u(-spread, spread);
    return {u(rng), u(rng), u(rng)};
}

// Three joints in a line along x with unit bones and no shape dependence.
BodyModel unit_chain()
{
    Joints3 offsets(3, 3);
    offsets << 0, 0, 0, 1, 0, 0, 1, 0, 0;
    return BodyModel({-1, 0, 1}, offsets, std::vector<ShapeBasis>(3, ShapeBasis::Zero()));
}

Pose random_pose(std::mt19937_64& rng, int joints, double spread)
{
    Pose theta(3 * joints);
    for (int j = 0; j < joints; ++j) {
        theta.segment<3>(3 * j) = random_vec3(rng, spread);
    }
    return theta;
}

} // namespace

TEST_CASE("rodrigues: zero vector is the identity")
{
    CHECK(rodrigues(Vec3::Zero()) == Mat3::Identity());
}

TEST_CASE("rodrigues: quarter turn about z maps x to y")
{
    const Vec3 v = rodrigues(Vec3(0, 0, std::numbers::pi / 2)) * Vec3(1, 0, 0);
    CHECK((v - Vec3(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("rodrigues: orthonormal, det +1 and R(v) R(-v) = I over random inputs")
{
    std::mt19937_64 rng(3);
    for (int k = 0; k < 1000; ++k) {
        const Vec3 v = random_vec3(rng, 2.0 * std::numbers::pi);
        const Mat3 r = rodrigues(v);
        CHECK((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(std::abs(r.determinant() - 1.0) < 1e-10);
        CHECK((r * rodrigues(Vec3(-v)) - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("rodrigues: angle and axis agree with Eigen's AngleAxis")
{
    std::mt19937_64 rng(5);
    for (int k = 0; k < 200; ++k) {
        const Vec3 v = random_vec3(rng, 3.0);
        const Mat3 expected = Eigen::AngleAxisd(v.norm(), v.normalized()).toRotationMatrix();
        CHECK((rodrigues(v) - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("rodrigues: jacobian matches central differences, including near zero")
{
    std::mt19937_64 rng(11);
    std::vector<Vec3> points = {Vec3::Zero(), Vec3(1e-5, -2e-5, 3e-6), Vec3(1e-3, 0, 0)};
    for (int k = 0; k < 50; ++k) {
        points.push_back(random_vec3(rng, 2.5));
    }
    const double h = 1e-6;
    for (const Vec3& v : points) {
        std::array<Mat3, 3> jac;
        const Mat3 r = rodrigues(v, jac);
        CHECK((r - rodrigues(v)).cwiseAbs().maxCoeff() < 1e-15);
        for (int a = 0; a < 3; ++a) {
            Vec3 vp = v;
            Vec3 vm = v;
            vp[a] += h;
            vm[a] -= h;
            const Mat3 numeric = (rodrigues(vp) - rodrigues(vm)) / (2 * h);
            CHECK((numeric - jac[static_cast<std::size_t>(a)]).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
}

TEST_CASE("canonicalize_axis_angle keeps the rotation and bounds the norm")
{
    std::mt19937_64 rng(9);
    for (int k = 0; k < 200; ++k) {
        const Vec3 v = random_vec3(rng, 12.0);
        const Vec3 c = canonicalize_axis_angle(v);
        CHECK(c.norm() < 2 * std::numbers::pi);
        CHECK((rodrigues(c) - rodrigues(v)).cwiseAbs().maxCoeff() < 1e-9);
    }
    CHECK(canonicalize_axis_angle(Vec3::Zero()) == Vec3::Zero());
}

TEST_CASE("bone_offsets is linear in beta")
{
    const BodyModel model = default_body_model();
    CHECK(bone_offsets(model, Shape::Zero()) == model.rest_offsets());
    for (int k = 0; k < kShapeDim; ++k) {
        const Joints3 off = bone_offsets(model, Shape::Unit(k));
        for (int i = 0; i < model.joint_count(); ++i) {
            const Vec3 expected = model.rest_offsets().row(i).transpose() + model.shape_basis(i).col(k);
            CHECK((off.row(i).transpose() - expected).norm() < 1e-15);
        }
    }
    const Shape b1 = Shape::Unit(2);
    const Shape b2 = Shape::Unit(7);
    const Joints3 sum = bone_offsets(model, 0.7 * b1 - 1.3 * b2);
    const Joints3 rest = model.rest_offsets();
    const Joints3 expected = rest + 0.7 * (bone_offsets(model, b1) - rest) - 1.3 * (bone_offsets(model, b2) - rest);
    CHECK((sum - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("default model: valid tree, non-zero bones, positive lengths for beta in [-3, 3]")
{
    const BodyModel model = default_body_model();
    REQUIRE(model.joint_count() == 24);
    CHECK(model.parent(0) == -1);
    for (int i = 1; i < 24; ++i) {
        CHECK(model.parent(i) >= 0);
        CHECK(model.parent(i) < i);
        CHECK(model.rest_offsets().row(i).norm() > 0.0);
    }
    // extreme corners of the shape box
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> sign(0, 1);
    for (int k = 0; k < 500; ++k) {
        Shape beta;
        for (int d = 0; d < kShapeDim; ++d) {
            beta[d] = sign(rng) ? 3.0 : -3.0;
        }
        const Joints3 off = bone_offsets(model, beta);
        for (int i = 1; i < 24; ++i) {
            CHECK(off.row(i).norm() > 0.0);
            CHECK(off.row(i).dot(model.rest_offsets().row(i)) > 0.0);
        }
    }
}

TEST_CASE("BodyModel rejects malformed trees")
{
    Joints3 offsets(3, 3);
    offsets << 0, 0, 0, 1, 0, 0, 1, 0, 0;
    const std::vector<ShapeBasis> basis(3, ShapeBasis::Zero());
    CHECK_THROWS_AS(BodyModel({-1, 0, 2}, offsets, basis), ValidationError); // not topological
    CHECK_THROWS_AS(BodyModel({0, 0, 1}, offsets, basis), ValidationError);  // root has a parent
    CHECK_THROWS_AS(BodyModel({-1, 0}, offsets, basis), ValidationError);    // size mismatch
    Joints3 zero_bone = offsets;
    zero_bone.row(2).setZero();
    CHECK_THROWS_AS(BodyModel({-1, 0, 1}, zero_bone, basis), ValidationError);
}

TEST_CASE("forward_kinematics: rest pose is the cumulative sum of offsets")
{
    const BodyModel model = default_body_model();
    const Joints3 x = forward_kinematics(model, Shape::Zero(), Pose::Zero(72));
    CHECK(x.row(0).norm() == 0.0);
    for (int i = 1; i < 24; ++i) {
        Vec3 expected = Vec3::Zero();
        for (int j = i; j > 0; j = model.parent(j)) {
            expected += model.rest_offsets().row(j).transpose();
        }
        CHECK((x.row(i).transpose() - expected).norm() < 1e-14);
    }
}

TEST_CASE("forward_kinematics: bent 3-joint chain ends at (1, 1, 0)")
{
    Pose theta = Pose::Zero(9);
    theta.segment<3>(3) = Vec3(0, 0, std::numbers::pi / 2);
    const Joints3 x = forward_kinematics(unit_chain(), Shape::Zero(), theta);
    CHECK((x.row(2).transpose() - Vec3(1, 1, 0)).norm() < 1e-12);
    CHECK((x.row(1).transpose() - Vec3(1, 0, 0)).norm() < 1e-12);
}

TEST_CASE("forward_kinematics: root rotation rotates the whole body rigidly")
{
    const BodyModel model = default_body_model();
    std::mt19937_64 rng(21);
    for (int k = 0; k < 20; ++k) {
        Pose theta = random_pose(rng, 24, 0.5);
        const Shape beta = Shape::Random();
        Pose no_root = theta;
        no_root.head<3>().setZero();
        const Joints3 rotated = forward_kinematics(model, beta, theta);
        const Joints3 base = forward_kinematics(model, beta, no_root);
        const Mat3 r = rodrigues(Vec3(theta.head<3>()));
        CHECK((rotated - base * r.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("forward_kinematics: bone lengths do not depend on the pose")
{
    const BodyModel model = default_body_model();
    std::mt19937_64 rng(8);
    const Shape beta = Shape::Random();
    const Joints3 off = bone_offsets(model, beta);
    for (int k = 0; k < 20; ++k) {
        const Joints3 x = forward_kinematics(model, beta, random_pose(rng, 24, 1.5));
        for (int i = 1; i < 24; ++i) {
            CHECK(std::abs((x.row(i) - x.row(model.parent(i))).norm() - off.row(i).norm()) < 1e-12);
        }
    }
}

TEST_CASE("project: orthographic arithmetic and depth invariance")
{
    Joints3 x(1, 3);
    x << 1, 2, 3;
    CHECK(project(x, CameraParams{}).row(0) == Eigen::RowVector2d(1, 2));
    const CameraParams cam{2.0, Vec2(10, 20)};
    CHECK(project(x, cam).row(0) == Eigen::RowVector2d(12, 24));
    Joints3 shifted = x;
    shifted(0, 2) += 100.0;
    CHECK(project(shifted, cam) == project(x, cam));
}

TEST_CASE("backpropagate: matches finite differences of a scalar of project(FK)")
{
    const BodyModel model = default_body_model();
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n(0.0, 1.0);
    const double h = 1e-6;
    for (int trial = 0; trial < 5; ++trial) {
        Shape beta;
        for (auto& b : beta) {
            b = n(rng);
        }
        const Pose theta = random_pose(rng, 24, 1.0);
        Joints3 weights(24, 3);
        for (Eigen::Index i = 0; i < weights.size(); ++i) {
            weights.data()[i] = n(rng);
        }
        auto scalar = [&](const Shape& b, const Pose& t) {
            return forward_kinematics(model, b, t).cwiseProduct(weights).sum();
        };
        KinematicState state;
        forward_kinematics(model, beta, theta, state);
        Eigen::VectorXd g_theta = Eigen::VectorXd::Zero(72);
        Shape g_beta = Shape::Zero();
        backpropagate(model, state, weights, g_theta, g_beta);

        for (int k = 0; k < 72; ++k) {
            Pose tp = theta;
            Pose tm = theta;
            tp[k] += h;
            tm[k] -= h;
            const double numeric = (scalar(beta, tp) - scalar(beta, tm)) / (2 * h);
            CHECK(std::abs(numeric - g_theta[k]) <= 1e-5 * std::max(1.0, std::abs(numeric)));
        }
        for (int k = 0; k < kShapeDim; ++k) {
            Shape bp = beta;
            Shape bm = beta;
            bp[k] += h;
            bm[k] -= h;
            const double numeric = (scalar(bp, theta) - scalar(bm, theta)) / (2 * h);
            CHECK(std::abs(numeric - g_beta[k]) <= 1e-5 * std::max(1.0, std::abs(numeric)));
        }
    }
}
