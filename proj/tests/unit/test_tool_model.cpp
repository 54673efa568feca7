#include <random>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "support.hpp"
#include "toolpose/errors.hpp"
#include "toolpose/tool_model.hpp"

using namespace toolpose;

namespace {

// Link frames composed by hand with Eigen transforms, following the chain
// parent * offset * rot(axis, q).
std::vector<Eigen::Isometry3d> hand_chain(const ToolModel& m, const JointVector& q) {
    std::vector<Eigen::Isometry3d> out;
    for (const Link& l : m.links) {
        Eigen::Isometry3d off = Eigen::Isometry3d::Identity();
        off.linear() = l.offset.rotation.matrix();
        off.translation() = l.offset.translation;
        Eigen::Isometry3d f = l.parent < 0 ? off : out[static_cast<std::size_t>(l.parent)] * off;
        if (l.kind == JointKind::Revolute) {
            f.rotate(Eigen::AngleAxisd(q[l.joint_index], l.axis.normalized()));
        }
        out.push_back(f);
    }
    return out;
}

}  // namespace

TEST_CASE("default model shape") {
    const ToolModel m = default_tool_model();
    CHECK_NOTHROW(m.validate());
    int revolute = 0;
    for (const Link& l : m.links) revolute += l.kind == JointKind::Revolute;
    CHECK(revolute == 3);
    for (const GaussianPrimitive& g : m.gaussians) {
        CHECK(g.link >= 0);
        CHECK(g.link < static_cast<int>(m.links.size()));
    }
    // Deterministic construction.
    const ToolModel again = default_tool_model();
    REQUIRE(again.gaussians.size() == m.gaussians.size());
    for (std::size_t i = 0; i < m.gaussians.size(); ++i) {
        CHECK(again.gaussians[i].mean_local == m.gaussians[i].mean_local);
    }
}

TEST_CASE("default model renders a silhouette") {
    const ToolModel m = default_tool_model();
    const JointVector q = JointVector::Zero();
    const auto out = render(pose_gaussians(m, testing::view_pose(m, q), q), testing::camera(64, 100));
    double peak = 0.0;
    for (double a : out.alpha.data()) peak = std::max(peak, a);
    CHECK(peak > 0.5);
}

TEST_CASE("forward kinematics matches a hand-composed chain") {
    const ToolModel m = default_tool_model();
    const auto neutral = forward_kinematics(m, JointVector::Zero());
    const auto hand0 = hand_chain(m, JointVector::Zero());
    for (std::size_t i = 0; i < neutral.size(); ++i) {
        CHECK((neutral[i].matrix() - hand0[i].matrix()).norm() <= 1e-12);
    }
    for (double theta : {-0.7, 0.25, 1.2}) {
        const JointVector q(theta, 0.0, 0.0);
        const auto fk = forward_kinematics(m, q);
        const auto hand = hand_chain(m, q);
        for (std::size_t i = 0; i < fk.size(); ++i) {
            CHECK((fk[i].matrix() - hand[i].matrix()).norm() <= 1e-12);
        }
    }
}

TEST_CASE("equal jaw angles keep the jaws mirror-symmetric") {
    const ToolModel m = default_tool_model();
    for (double phi : {0.0, 0.3, 0.9}) {
        const JointVector q(0.4, phi, phi);
        const auto posed = pose_gaussians(m, Pose::identity(), q);
        for (std::size_t i = 0; i < m.gaussians.size(); ++i) {
            if (m.gaussians[i].link != 2) continue;
            // The mirror of each jaw-1 Gaussian across the pitch plane is a jaw-2 Gaussian.
            const Vec3 p = posed[i].mean_cam;
            double best = 1e9;
            for (std::size_t j = 0; j < m.gaussians.size(); ++j) {
                if (m.gaussians[j].link != 3) continue;
                best = std::min(best, (posed[j].mean_cam - Vec3(-p.x(), p.y(), p.z())).norm());
            }
            CHECK(best <= 1e-12);
        }
    }
}

TEST_CASE("forward kinematics rejects joints outside the limits") {
    const ToolModel m = default_tool_model();
    JointVector q = m.limits.upper;
    q[0] += 0.1;
    CHECK_THROWS_AS(forward_kinematics(m, q), Error);
}

TEST_CASE("clamp_joints") {
    JointLimits lim;
    lim.lower = Vec3(-1.5, -0.3, -0.3);
    lim.upper = Vec3(1.5, 1.4, 1.4);
    const JointVector inside(0.1, 0.2, -0.1);
    CHECK(clamp_joints(inside, lim) == inside);
    CHECK(clamp_joints(JointVector(0, 1.9, 0), lim)[1] == 1.4);
    CHECK(clamp_joints(JointVector(-1.6, 0, 0), lim)[0] == -1.5);
}

TEST_CASE("pose_gaussians") {
    ToolModel m = default_tool_model();
    GaussianPrimitive g;
    g.link = 1;
    m.gaussians = {g};
    const auto at_origin = pose_gaussians(m, Pose::identity(), JointVector::Zero());
    CHECK((at_origin[0].mean_cam - forward_kinematics(m, JointVector::Zero())[1].translation).norm() == 0.0);

    const ToolModel tool = default_tool_model();
    const JointVector q(0.3, 0.2, 0.5);
    std::mt19937_64 rng(7);
    const Pose base = testing::random_pose(rng, 0.1);
    const Vec3 t(0.01, -0.02, 0.03);
    const Pose shifted{base.rotation, base.translation + t};
    const auto a = pose_gaussians(tool, base, q);
    const auto b = pose_gaussians(tool, shifted, q);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK((b[i].mean_cam - a[i].mean_cam - t).norm() <= 1e-15);
        CHECK(b[i].cov_cam == a[i].cov_cam);
    }

    // Eigenvalues of the posed covariance are the squared axis scales.
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Mat3& c = a[i].cov_cam;
        CHECK((c - c.transpose()).norm() <= 1e-12 * c.norm());
        Eigen::SelfAdjointEigenSolver<Mat3> es(c);
        Vec3 expected = tool.gaussians[i].scale.cwiseAbs2();
        std::sort(expected.data(), expected.data() + 3);
        CHECK((es.eigenvalues() - expected).norm() <= 1e-10 * expected.norm());
        CHECK(es.eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("jacobian_gaussians") {
    const ToolModel m = default_tool_model();
    const JointVector q(0.3, 0.2, 0.5);
    std::mt19937_64 rng(8);
    const Pose pose = testing::random_pose(rng, 0.1);
    const auto jac = jacobian_gaussians(m, pose, q);
    const double h = 1e-6;
    for (std::size_t i = 0; i < jac.size(); ++i) {
        CHECK(jac[i].dmean_dt == Mat3::Identity());
        if (m.gaussians[i].link != 3) {
            CHECK(jac[i].dmean_dq.col(2).norm() == 0.0);
        }
    }
    for (int c = 0; c < 3; ++c) {
        JointVector qp = q, qm = q;
        qp[c] += h;
        qm[c] -= h;
        const auto gp = pose_gaussians(m, pose, qp);
        const auto gm = pose_gaussians(m, pose, qm);
        for (std::size_t i = 0; i < jac.size(); ++i) {
            const Vec3 fd = (gp[i].mean_cam - gm[i].mean_cam) / (2 * h);
            const Vec3 an = jac[i].dmean_dq.col(c);
            CHECK((fd - an).norm() <= 1e-5 * std::max(an.norm(), 1e-3));
            const Mat3 fd_cov = (gp[i].cov_cam - gm[i].cov_cam) / (2 * h);
            CHECK((fd_cov - jac[i].dcov_dq[c]).norm() <= 1e-5 * std::max(jac[i].dcov_dq[c].norm(), 1e-8));
        }
    }
    // Rotation derivatives with R exp([w]x) perturbations.
    for (int c = 0; c < 3; ++c) {
        Vec3 w = Vec3::Zero();
        w[c] = h;
        const Pose pp{pose.rotation * Rotation::exp(w), pose.translation};
        const Pose pm{pose.rotation * Rotation::exp(-w), pose.translation};
        const auto gp = pose_gaussians(m, pp, q);
        const auto gm = pose_gaussians(m, pm, q);
        for (std::size_t i = 0; i < jac.size(); ++i) {
            const Vec3 fd = (gp[i].mean_cam - gm[i].mean_cam) / (2 * h);
            CHECK((fd - jac[i].dmean_domega.col(c)).norm() <= 1e-5 * std::max(fd.norm(), 1e-3));
        }
    }
}

TEST_CASE("model validation names the violation") {
    ToolModel m = default_tool_model();
    m.gaussians[5].link = 42;
    try {
        m.validate();
        FAIL("expected InvalidSpec");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidSpec);
        CHECK(std::string(e.what()).find("gaussians[5]") != std::string::npos);
    }
    m = default_tool_model();
    m.gaussians[0].opacity = 1.5;
    CHECK_THROWS_AS(m.validate(), Error);
    m = default_tool_model();
    m.limits.lower[1] = 2.0;
    CHECK_THROWS_AS(m.validate(), Error);
    m = default_tool_model();
    m.links[3].kind = JointKind::Fixed;
    CHECK_THROWS_AS(m.validate(), Error);
}
