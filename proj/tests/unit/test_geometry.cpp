#include <numbers>
#include <random>

#include "doctest.h"
#include "support.hpp"
#include "toolpose/errors.hpp"
#include "toolpose/geometry.hpp"

using namespace toolpose;
using testing::random_pose;

namespace {

double pose_gap(const Pose& a, const Pose& b) {
    return (a.matrix() - b.matrix()).norm();
}

}  // namespace

TEST_CASE("compose with identity and inverse") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 20; ++i) {
        const Pose t = random_pose(rng);
        CHECK(pose_gap(compose(Pose::identity(), t), t) == 0.0);
        CHECK(pose_gap(compose(t, invert(t)), Pose::identity()) <= 1e-12);
    }
    const Pose rz90{Rotation::about_z(std::numbers::pi / 2), Vec3::Zero()};
    const Pose rz180{Rotation::about_z(std::numbers::pi), Vec3::Zero()};
    CHECK(pose_gap(compose(rz90, rz90), rz180) <= 1e-12);
}

TEST_CASE("compose matches homogeneous matrix product") {
    std::mt19937_64 rng(2);
    const Pose a = random_pose(rng), b = random_pose(rng);
    CHECK((compose(a, b).matrix() - a.matrix() * b.matrix()).norm() <= 1e-12);
    const Mat4 m = compose(a, b).matrix();
    CHECK(m(3, 0) == 0.0);
    CHECK(m(3, 1) == 0.0);
    CHECK(m(3, 2) == 0.0);
    CHECK(m(3, 3) == 1.0);
}

TEST_CASE("invert") {
    CHECK(invert(Pose::identity()) == Pose::identity());
    const Pose inv = invert(Pose::from_translation(Vec3(1, 2, 3)));
    CHECK(inv.translation == Vec3(-1, -2, -3));
    CHECK(inv.rotation == Rotation::identity());
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
        const Pose p = random_pose(rng);
        CHECK(pose_gap(invert(invert(p)), p) <= 1e-12);
    }
}

TEST_CASE("rotation construction validates") {
    Mat3 m = Mat3::Identity();
    m(0, 0) = 1.1;
    CHECK_THROWS_AS(Rotation::from_matrix(m), Error);
    Mat3 reflection = Mat3::Identity();
    reflection(2, 2) = -1.0;
    CHECK_THROWS_AS(Rotation::from_matrix(reflection), Error);
    Mat4 h = Pose::identity().matrix();
    h(3, 0) = 1e-3;
    CHECK_THROWS_AS(Pose::from_matrix(h), Error);
    std::mt19937_64 rng(4);
    const Vec3 w = testing::random_unit(rng) * 1.3;
    CHECK((Rotation::exp(w).matrix() - testing::eigen_rotation(w)).norm() <= 1e-12);
    CHECK((Rotation::exp(w).log() - w).norm() <= 1e-12);
}

TEST_CASE("project") {
    const Intrinsics k = Intrinsics::create(100, 100, 50, 50, 100, 100);
    CHECK(project(Vec3(0, 0, 1), k) == Vec2(50, 50));
    CHECK(project(Vec3(0.5, 0, 1), k) == Vec2(100, 50));
    try {
        project(Vec3(0, 0, -1), k);
        FAIL("expected BehindCamera");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BehindCamera);
    }
    CHECK_THROWS_AS(Intrinsics::create(0, 100, 50, 50, 100, 100), Error);
    CHECK_THROWS_AS(Intrinsics::create(100, 100, 50, 50, 0, 100), Error);
}

TEST_CASE("projection jacobian") {
    const Intrinsics k = Intrinsics::create(100, 100, 50, 50, 100, 100);
    Mat23 on_axis;
    on_axis << 100, 0, 0, 0, 100, 0;
    CHECK((projection_jacobian(Vec3(0, 0, 1), k) - on_axis).norm() == 0.0);
    Mat23 off_axis;
    off_axis << 50, 0, -25, 0, 50, 0;
    CHECK((projection_jacobian(Vec3(1, 0, 2), k) - off_axis).norm() <= 1e-12);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    const double h = 1e-6;
    for (int trial = 0; trial < 20; ++trial) {
        const Vec3 p(u(rng), u(rng), 1.0 + u(rng));
        const Mat23 j = projection_jacobian(p, k);
        for (int c = 0; c < 3; ++c) {
            Vec3 d = Vec3::Zero();
            d[c] = h;
            const Vec2 fd = (project(p + d, k) - project(p - d, k)) / (2 * h);
            CHECK((fd - j.col(c)).norm() <= 1e-5 * std::max(1.0, j.col(c).norm()));
        }
    }
}

TEST_CASE("back_project inverts project") {
    const Intrinsics k = Intrinsics::create(200, 180, 63.5, 60.2, 128, 120);
    const Vec3 p(0.01, -0.02, 0.11);
    CHECK((back_project(project(p, k), p.z(), k) - p).norm() <= 1e-15);
}

TEST_CASE("downscaled intrinsics keep pixel-center alignment") {
    const Intrinsics k = Intrinsics::create(200, 200, 63.5, 63.5, 128, 128);
    const Intrinsics h = downscaled(k, 2);
    CHECK(h.width == 64);
    CHECK(h.fx == 100.0);
    // Full-res pixels 0 and 1 average into half-res pixel 0.
    const Vec3 p(0.003, -0.001, 0.1);
    CHECK(project(p, h).x() == doctest::Approx((project(p, k).x() - 0.5) / 2.0).epsilon(1e-12));
}

TEST_CASE("rotation update") {
    std::mt19937_64 rng(6);
    const Rotation r = Rotation::exp(testing::random_unit(rng));
    CHECK(apply_rotation_update(r, Vec3::Zero(), 0.3) == r);

    // Small steps agree with the exponential map to second order.
    const Vec3 w = testing::random_unit(rng) * 1e-3;
    const Mat3 expected = r.matrix() * testing::eigen_rotation(0.3 * w);
    CHECK((apply_rotation_update(r, w, 0.3).matrix() - expected).norm() <= 1e-6);

    std::uniform_real_distribution<double> mag(0.0, 50.0);
    for (int i = 0; i < 50; ++i) {
        const Rotation u = apply_rotation_update(r, testing::random_unit(rng) * mag(rng), 0.3);
        const Mat3& m = u.matrix();
        CHECK((m.transpose() * m - Mat3::Identity()).norm() <= 1e-9);
        CHECK(std::abs(m.determinant() - 1.0) <= 1e-9);
    }
}

TEST_CASE("clamp_vector") {
    CHECK(clamp_vector(Vec3(0.01, -0.01, 0.005), -0.02, 0.02) == Vec3(0.01, -0.01, 0.005));
    CHECK(clamp_vector(Vec3(0.5, -0.5, 0), -0.02, 0.02) == Vec3(0.02, -0.02, 0));
    CHECK(clamp_vector(Vec3(3, -2, 1), 0, 0) == Vec3::Zero());
    CHECK_THROWS_AS(clamp_vector(Vec3::Zero(), 1, -1), Error);
}
