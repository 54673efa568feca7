#include "toolpose/tool_model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "toolpose/errors.hpp"

namespace toolpose {

namespace {

[[noreturn]] void invalid(const std::string& where, const std::string& what) {
    throw Error(ErrorCode::InvalidSpec, where + ": " + what);
}

std::string at(const char* field, std::size_t i) {
    std::ostringstream os;
    os << field << "[" << i << "]";
    return os.str();
}

Mat3 symmetrized(const Mat3& m) { return 0.5 * (m + m.transpose()); }

// Per-link base-frame rotation axis and the set of joints moving the link.
struct ChainInfo {
    std::vector<Pose> frames;
    std::vector<std::array<bool, kNumJoints>> moved_by;
    std::array<Vec3, kNumJoints> axis_base;
    std::array<Vec3, kNumJoints> origin_base;
};

ChainInfo chain_info(const ToolModel& model, const JointVector& q) {
    ChainInfo info;
    info.frames = forward_kinematics(model, q);
    info.moved_by.resize(model.links.size());
    for (std::size_t i = 0; i < model.links.size(); ++i) {
        const Link& link = model.links[i];
        std::array<bool, kNumJoints> moved{false, false, false};
        if (link.parent >= 0) {
            moved = info.moved_by[static_cast<std::size_t>(link.parent)];
        }
        if (link.kind == JointKind::Revolute) {
            const auto j = static_cast<std::size_t>(link.joint_index);
            moved[j] = true;
            info.axis_base[j] = info.frames[i].rotation * link.axis.normalized();
            info.origin_base[j] = info.frames[i].translation;
        }
        info.moved_by[i] = moved;
    }
    return info;
}

}  // namespace

bool JointLimits::contains(const JointVector& q, double tol) const {
    for (int i = 0; i < kNumJoints; ++i) {
        if (!std::isfinite(q[i]) || q[i] < lower[i] - tol || q[i] > upper[i] + tol) {
            return false;
        }
    }
    return true;
}

void ToolModel::validate() const {
    if (links.empty()) {
        invalid("links", "at least one link is required");
    }
    std::array<int, kNumJoints> joint_seen{0, 0, 0};
    for (std::size_t i = 0; i < links.size(); ++i) {
        const Link& link = links[i];
        if (i == 0 && link.parent != -1) {
            invalid(at("links", i) + ".parent", "the first link must be the root (parent -1)");
        }
        if (i > 0 && (link.parent < 0 || link.parent >= static_cast<int>(i))) {
            invalid(at("links", i) + ".parent", "must reference an earlier link");
        }
        if (link.kind == JointKind::Revolute) {
            if (std::abs(link.axis.norm() - 1.0) > 1e-9) {
                invalid(at("links", i) + ".axis", "joint axis must be unit length");
            }
            if (link.joint_index < 0 || link.joint_index >= kNumJoints) {
                invalid(at("links", i) + ".joint", "revolute joints must use index 0, 1 or 2");
            }
            if (joint_seen[static_cast<std::size_t>(link.joint_index)]++ > 0) {
                invalid(at("links", i) + ".joint", "joint index used twice");
            }
        }
        if (!link.offset.translation.allFinite()) {
            invalid(at("links", i) + ".offset", "translation must be finite");
        }
    }
    for (int j = 0; j < kNumJoints; ++j) {
        if (joint_seen[static_cast<std::size_t>(j)] != 1) {
            invalid("links", "exactly three revolute joints (q1, q2, q3) are required");
        }
    }
    for (int j = 0; j < kNumJoints; ++j) {
        if (!(limits.lower[j] <= limits.upper[j])) {
            invalid(at("limits.lower", static_cast<std::size_t>(j)), "must not exceed the upper limit");
        }
    }
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        const GaussianPrimitive& g = gaussians[i];
        if (g.link < 0 || g.link >= static_cast<int>(links.size())) {
            invalid(at("gaussians", i) + ".link", "references a missing link");
        }
        if (!g.mean_local.allFinite()) {
            invalid(at("gaussians", i) + ".mean", "must be finite");
        }
        if (!(g.scale.minCoeff() > 0.0) || !g.scale.allFinite()) {
            invalid(at("gaussians", i) + ".scale", "components must be positive");
        }
        if (!(g.opacity >= 0.0 && g.opacity <= 1.0)) {
            invalid(at("gaussians", i) + ".opacity", "must lie in [0, 1]");
        }
        if (!(g.color.minCoeff() >= 0.0 && g.color.maxCoeff() <= 1.0)) {
            invalid(at("gaussians", i) + ".color", "components must lie in [0, 1]");
        }
    }
    if (!(shaft_length > 0.0)) {
        invalid("shaft_length", "must be positive");
    }
}

std::vector<Pose> forward_kinematics(const ToolModel& model, const JointVector& q) {
    if (!model.limits.contains(q)) {
        std::ostringstream os;
        os << "q = (" << q.transpose() << ") outside limits";
        throw Error(ErrorCode::JointOutOfRange, os.str());
    }
    std::vector<Pose> frames;
    frames.reserve(model.links.size());
    for (const Link& link : model.links) {
        Pose frame = link.parent < 0 ? link.offset
                                     : frames[static_cast<std::size_t>(link.parent)] * link.offset;
        if (link.kind == JointKind::Revolute) {
            frame.rotation = frame.rotation * Rotation::about_axis(link.axis, q[link.joint_index]);
        }
        frames.push_back(frame);
    }
    return frames;
}

JointVector clamp_joints(const JointVector& q, const JointLimits& limits) {
    return q.cwiseMax(limits.lower).cwiseMin(limits.upper);
}

std::vector<PosedGaussian> pose_gaussians(const ToolModel& model, const Pose& pose,
                                          const JointVector& q) {
    const std::vector<Pose> frames = forward_kinematics(model, q);
    std::vector<PosedGaussian> out;
    out.reserve(model.gaussians.size());
    for (const GaussianPrimitive& g : model.gaussians) {
        const Pose& link = frames[static_cast<std::size_t>(g.link)];
        const Mat3 r_total = (pose.rotation * link.rotation * g.orient_local).matrix();
        const Vec3 var = g.scale.cwiseProduct(g.scale);
        PosedGaussian pg;
        pg.mean_cam = pose * (link * g.mean_local);
        pg.cov_cam = symmetrized(r_total * var.asDiagonal() * r_total.transpose());
        pg.opacity = g.opacity;
        pg.color = g.color;
        out.push_back(pg);
    }
    return out;
}

std::vector<GaussianJacobian> jacobian_gaussians(const ToolModel& model, const Pose& pose,
                                                 const JointVector& q) {
    const ChainInfo info = chain_info(model, q);
    const Mat3& rp = pose.rotation.matrix();
    std::vector<GaussianJacobian> out;
    out.reserve(model.gaussians.size());
    for (const GaussianPrimitive& g : model.gaussians) {
        const auto li = static_cast<std::size_t>(g.link);
        const Pose& link = info.frames[li];
        const Vec3 p_base = link * g.mean_local;
        const Mat3 r_base = (link.rotation * g.orient_local).matrix();
        const Vec3 var = g.scale.cwiseProduct(g.scale);
        const Mat3 cov_base = r_base * var.asDiagonal() * r_base.transpose();

        GaussianJacobian jac;
        jac.dmean_domega = -rp * skew(p_base);
        jac.dmean_dt = Mat3::Identity();
        for (int k = 0; k < 3; ++k) {
            const Mat3 e = skew(Vec3::Unit(k));
            jac.dcov_domega[static_cast<std::size_t>(k)] =
                symmetrized(rp * (e * cov_base - cov_base * e) * rp.transpose());
        }
        for (std::size_t j = 0; j < kNumJoints; ++j) {
            if (!info.moved_by[li][j]) {
                continue;
            }
            const Vec3& a = info.axis_base[j];
            const Mat3 ax = skew(a);
            jac.dmean_dq.col(static_cast<Eigen::Index>(j)) = rp * a.cross(p_base - info.origin_base[j]);
            jac.dcov_dq[j] = symmetrized(rp * (ax * cov_base - cov_base * ax) * rp.transpose());
        }
        out.push_back(jac);
    }
    return out;
}

std::vector<PosedGaussian> transform(const Pose& pose, std::span<const PosedGaussian> gaussians) {
    const Mat3& r = pose.rotation.matrix();
    std::vector<PosedGaussian> out(gaussians.begin(), gaussians.end());
    for (PosedGaussian& g : out) {
        g.mean_cam = pose * g.mean_cam;
        g.cov_cam = symmetrized(r * g.cov_cam * r.transpose());
    }
    return out;
}

Vec3 model_centroid(const ToolModel& model, const JointVector& q) {
    const std::vector<Pose> frames = forward_kinematics(model, q);
    Vec3 sum = Vec3::Zero();
    for (const GaussianPrimitive& g : model.gaussians) {
        sum += frames[static_cast<std::size_t>(g.link)] * g.mean_local;
    }
    return model.gaussians.empty() ? sum : Vec3(sum / static_cast<double>(model.gaussians.size()));
}

Rotation canonical_view_rotation() {
    Mat3 m;
    // clang-format off
    m << 0.0, 0.0, 1.0,
         1.0, 0.0, 0.0,
         0.0, 1.0, 0.0;
    // clang-format on
    return Rotation::from_matrix(m);
}

ToolModel default_tool_model() {
    using std::numbers::pi;
    ToolModel model;
    model.shaft_length = 0.02;
    model.limits.lower = Vec3(-pi / 2.0, -0.35, -0.35);
    model.limits.upper = Vec3(pi / 2.0, 1.4, 1.4);

    constexpr double kJawOffset = 0.005;
    model.links = {
        Link{"shaft", -1, Pose::identity(), Vec3::UnitX(), JointKind::Fixed, -1},
        Link{"wrist_pitch", 0, Pose::identity(), Vec3::UnitX(), JointKind::Revolute, 0},
        Link{"jaw_1", 1, Pose::from_translation(Vec3(0.0, 0.0, kJawOffset)), Vec3::UnitY(),
             JointKind::Revolute, 1},
        Link{"jaw_2", 1, Pose::from_translation(Vec3(0.0, 0.0, kJawOffset)), -Vec3::UnitY(),
             JointKind::Revolute, 2},
    };

    const Vec3 shaft_color(0.30, 0.30, 0.34);
    const Vec3 wrist_color(0.75, 0.72, 0.64);
    const Vec3 jaw1_color(0.92, 0.80, 0.52);
    const Vec3 jaw2_color(0.52, 0.76, 0.92);
    // One side of the shaft and clevis carries a light stripe so roll about the
    // shaft axis shows up in the image.
    const Vec3 stripe_color(0.95, 0.62, 0.30);
    constexpr double kOpacity = 0.85;

    // Shaft: rings of 6 around the axis, running back from the wrist.
    constexpr int kRingSize = 6;
    constexpr double kShaftRadius = 0.0022;
    const int rings = static_cast<int>(std::round(model.shaft_length / 0.0025));
    for (int r = 0; r < rings; ++r) {
        const double z = -0.00125 - 0.0025 * r;
        for (int k = 0; k < kRingSize; ++k) {
            const double a = 2.0 * pi * k / kRingSize;
            GaussianPrimitive g;
            g.link = 0;
            g.mean_local = Vec3(kShaftRadius * std::cos(a), kShaftRadius * std::sin(a), z);
            g.orient_local = Rotation::about_z(a);
            g.scale = Vec3(0.0009, 0.0012, 0.0014);
            g.opacity = kOpacity;
            g.color = k == 0 ? stripe_color : shaft_color;
            model.gaussians.push_back(g);
        }
    }

    // Wrist clevis.
    for (double z : {0.0012, 0.0036}) {
        for (int k = 0; k < kRingSize; ++k) {
            const double a = 2.0 * pi * (k + 0.5) / kRingSize;
            GaussianPrimitive g;
            g.link = 1;
            g.mean_local = Vec3(0.0019 * std::cos(a), 0.0019 * std::sin(a), z);
            g.orient_local = Rotation::about_z(a);
            g.scale = Vec3(0.0008, 0.0011, 0.0012);
            g.opacity = kOpacity;
            g.color = k == 0 ? stripe_color : wrist_color;
            model.gaussians.push_back(g);
        }
    }

    // Jaws: tapering double row along +z; jaw 2 mirrors jaw 1 across x = 0.
    constexpr int kJawSteps = 8;
    for (int side = 0; side < 2; ++side) {
        const double mirror = side == 0 ? 1.0 : -1.0;
        for (int s = 0; s < kJawSteps; ++s) {
            const double z = 0.0006 + 0.00125 * s;
            const double taper = 1.0 - 0.45 * s / (kJawSteps - 1);
            for (double y : {-0.0007, 0.0007}) {
                GaussianPrimitive g;
                g.link = side == 0 ? 2 : 3;
                g.mean_local = Vec3(mirror * 0.0008 * taper, y * taper, z);
                g.scale = Vec3(0.0006 * taper, 0.0007 * taper, 0.0009);
                g.opacity = kOpacity;
                g.color = side == 0 ? jaw1_color : jaw2_color;
                model.gaussians.push_back(g);
            }
        }
    }
    model.validate();
    return model;
}

}  // namespace toolpose
