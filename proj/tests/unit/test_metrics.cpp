#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "toolpose/errors.hpp"
#include "toolpose/metrics.hpp"
#include "toolpose/trajectory.hpp"

using namespace toolpose;

namespace {

Trajectory line(int n, const Vec3& step) {
    Trajectory t;
    for (int i = 0; i < n; ++i) {
        TrajectoryRecord r;
        r.frame = i;
        r.pose.translation = step * i;
        t.records.push_back(r);
    }
    return t;
}

Trajectory offset(Trajectory t, const Vec3& d) {
    for (auto& r : t.records) r.pose.translation += d;
    return t;
}

Trajectory random_traj(std::mt19937_64& rng, int n) {
    Trajectory t;
    std::normal_distribution<double> g(0.0, 0.01);
    for (int i = 0; i < n; ++i) {
        TrajectoryRecord r;
        r.frame = 2 * i + 1;
        r.pose = {Rotation::exp(Vec3(g(rng), g(rng), g(rng)) * 50.0), Vec3(g(rng), g(rng), 0.1 + g(rng))};
        r.q = JointVector(g(rng), g(rng), g(rng));
        r.loss = std::abs(g(rng));
        t.records.push_back(r);
    }
    return t;
}

long double naive_ade(const Trajectory& a, const Trajectory& b) {
    long double sum = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) {
        long double s = 0.0L;
        for (int c = 0; c < 3; ++c) {
            const long double d = static_cast<long double>(a.records[i].pose.translation[c]) -
                                  static_cast<long double>(b.records[i].pose.translation[c]);
            s += d * d;
        }
        sum += std::sqrt(s);
    }
    return sum / static_cast<long double>(a.size());
}

bool rel_close(double got, long double want, double tol) {
    const long double scale = std::max(std::abs(want), 1e-300L);
    return std::abs(static_cast<long double>(got) - want) / scale <= tol;
}

}  // namespace

TEST_CASE("identical trajectories have zero error") {
    const Trajectory t = line(5, Vec3(0.001, 0.002, 0));
    CHECK(ade(t, t) == 0.0);
    CHECK(fde(t, t) == 0.0);
    const AxisError e = per_axis_error(t, t);
    CHECK(e.mean == Vec3::Zero());
    CHECK(e.std == Vec3::Zero());
}

TEST_CASE("constant (3,4,0) mm offset gives 5 mm") {
    const Trajectory gt = line(7, Vec3(0.001, 0.0, 0.002));
    const Trajectory est = offset(gt, Vec3(0.003, 0.004, 0.0));
    CHECK(ade(est, gt) == doctest::Approx(0.005).epsilon(1e-12));
    CHECK(fde(est, gt) == doctest::Approx(0.005).epsilon(1e-12));
}

TEST_CASE("error only at the final frame") {
    const int n = 8;
    const Trajectory gt = line(n, Vec3(0.001, 0, 0));
    Trajectory est = gt;
    est.records.back().pose.translation += Vec3(0, 0, 0.007);
    CHECK(fde(est, gt) == doctest::Approx(0.007).epsilon(1e-12));
    CHECK(ade(est, gt) == doctest::Approx(0.007 / n).epsilon(1e-12));
}

TEST_CASE("alternating errors cancel in the mean") {
    const double e = 0.0025;
    const Trajectory gt = line(6, Vec3::Zero());
    Trajectory est = gt;
    for (std::size_t i = 0; i < est.size(); ++i) est.records[i].pose.translation.x() = i % 2 == 0 ? e : -e;
    const AxisError a = per_axis_error(est, gt);
    CHECK(std::abs(a.mean.x()) <= 1e-18);
    CHECK(a.std.x() == doctest::Approx(e).epsilon(1e-12));
}

TEST_CASE("metrics agree with an extended-precision recomputation") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 40);
        const Trajectory a = random_traj(rng, n);
        Trajectory b = random_traj(rng, n);
        CHECK(rel_close(ade(a, b), naive_ade(a, b), 1e-12));
    }
}

TEST_CASE("rigid motion of both trajectories") {
    std::mt19937_64 rng(42);
    const Trajectory a = random_traj(rng, 25), b = random_traj(rng, 25);
    const Pose g = testing::random_pose(rng, 0.5);
    Trajectory ga = a, gb = b;
    for (auto* t : {&ga, &gb})
        for (auto& r : t->records) r.pose = compose(g, r.pose);
    CHECK(ade(ga, gb) == doctest::Approx(ade(a, b)).epsilon(1e-12));
    CHECK(fde(ga, gb) == doctest::Approx(fde(a, b)).epsilon(1e-12));
    const Vec3 rotated = g.rotation * per_axis_error(a, b).mean;
    CHECK((per_axis_error(ga, gb).mean - rotated).norm() <= 1e-12 * std::max(rotated.norm(), 1e-3));
}

TEST_CASE("metrics reject mismatched trajectories") {
    const Trajectory a = line(4, Vec3::Zero());
    const Trajectory b = line(5, Vec3::Zero());
    CHECK_THROWS_AS(ade(a, b), Error);
    Trajectory c = a;
    c.records[2].frame = 7;
    c.records[3].frame = 8;
    CHECK_THROWS_AS(fde(a, c), Error);
    CHECK_THROWS_AS(ade(Trajectory{}, Trajectory{}), Error);
}

TEST_CASE("report invariants") {
    std::mt19937_64 rng(43);
    const Trajectory a = random_traj(rng, 15), b = random_traj(rng, 15);
    const MetricsReport r = evaluate(a, b);
    CHECK(r.ade >= 0.0);
    CHECK(r.fde >= 0.0);
    double worst = 0.0;
    for (double e : r.per_frame_errors) worst = std::max(worst, e);
    CHECK(r.ade <= worst);
    CHECK(r.fde == r.per_frame_errors.back());
    CHECK(r.per_frame_rotation_errors.size() == 15);
}

TEST_CASE("aggregate summary") {
    MetricsReport one;
    one.ade = 0.001;
    one.fde = 0.002;
    const MetricsReport single[] = {one};
    const AggregateSummary s1 = aggregate_reports(single);
    CHECK(s1.ade.mean == 0.001);
    CHECK(s1.ade.std == 0.0);

    MetricsReport three = one;
    three.ade = 0.003;
    const MetricsReport pair[] = {one, three};
    const AggregateSummary s2 = aggregate_reports(pair);
    CHECK(s2.ade.mean == doctest::Approx(0.002).epsilon(1e-14));
    CHECK(s2.ade.std == doctest::Approx(0.001).epsilon(1e-12));
    CHECK_THROWS_AS(aggregate_reports(std::span<const MetricsReport>{}), Error);
}

TEST_CASE("report formatting") {
    CHECK(format_vector_mm(Vec3(-0.00464, 0.00025, 0.00664)) == "[-4.64, 0.25, 6.64]");
    CHECK(format_vector_mm(Vec3(-1e-9, 0, 0)) == "[0.00, 0.00, 0.00]");
    CHECK(format_mean_std_mm({0.0097, 0.0028}) == "9.7 ± 2.8");
    std::ostringstream os;
    write_report(os, evaluate(line(3, Vec3(0.001, 0, 0)), line(3, Vec3(0.001, 0, 0))));
    CHECK(os.str().find("ADE") != std::string::npos);
}

TEST_CASE("trajectory csv round-trip is bit exact") {
    std::mt19937_64 rng(44);
    Trajectory t = random_traj(rng, 12);
    t.records[4].loss.reset();
    t.records[5].loss = 0.1 + 0.2;  // not representable in short decimal
    const auto path = testing::scratch_dir("traj") / "t.csv";
    save_trajectory(path, t);
    const Trajectory back = load_trajectory(path);
    CHECK(back == t);
}

TEST_CASE("truncated and empty trajectory files") {
    std::mt19937_64 rng(45);
    std::ostringstream os;
    write_trajectory(os, random_traj(rng, 3));
    std::string text = os.str();
    text.resize(text.size() - 40);
    std::istringstream truncated(text);
    try {
        read_trajectory(truncated, "est.csv");
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParseError);
        CHECK(std::string(e.what()).find("est.csv:4") != std::string::npos);
    }
    std::istringstream empty("");
    CHECK_THROWS_AS(read_trajectory(empty), Error);
    std::istringstream header_only(std::string(kTrajectoryHeader) + "\n");
    CHECK_THROWS_AS(read_trajectory(header_only), Error);
}

TEST_CASE("shortest round-trip real formatting") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 1e300, 0.0}) {
        CHECK(std::stod(format_real(v)) == v);
    }
    CHECK(format_real(0.5) == "0.5");
}
