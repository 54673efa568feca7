#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "toolpose/geometry.hpp"

namespace toolpose {

/// (q1, q2, q3) = (wrist pitch, jaw 1, jaw 2), radians.
using JointVector = Eigen::Vector3d;
constexpr int kNumJoints = 3;

struct JointLimits {
    Vec3 lower = Vec3::Constant(-1.0);
    Vec3 upper = Vec3::Constant(1.0);

    bool contains(const JointVector& q, double tol = 1e-9) const;
};

enum class JointKind { Fixed, Revolute };

struct Link {
    std::string name;
    int parent = -1;  // -1 only for the root
    Pose offset;      // parent frame -> joint frame before rotation
    Vec3 axis = Vec3::UnitX();
    JointKind kind = JointKind::Fixed;
    int joint_index = -1;  // 0..2 for revolute links
};

struct GaussianPrimitive {
    int link = 0;
    Vec3 mean_local = Vec3::Zero();
    Vec3 scale = Vec3::Constant(1e-3);  // per-axis standard deviation, meters
    Rotation orient_local;
    double opacity = 1.0;
    Vec3 color = Vec3::Constant(0.5);
};

/// Kinematic tree with Gaussians rigidly attached to its links. Links are stored
/// parents-first; link 0 is the end-effector base.
struct ToolModel {
    std::vector<Link> links;
    std::vector<GaussianPrimitive> gaussians;
    JointLimits limits;
    double shaft_length = 0.02;

    /// Throws InvalidSpec naming the first violated invariant, e.g. "links[2].axis".
    void validate() const;
};

/// A Gaussian expressed in the camera frame.
struct PosedGaussian {
    Vec3 mean_cam = Vec3::Zero();
    Mat3 cov_cam = Mat3::Identity();
    double opacity = 1.0;
    Vec3 color = Vec3::Zero();
};

/// Derivatives of one posed Gaussian. Rotation is perturbed on the right,
/// R(omega) = R exp([omega]x); translation additively. Column / array index k
/// is the k-th coordinate of omega, delta_t or q.
struct GaussianJacobian {
    Mat3 dmean_domega = Mat3::Zero();
    Mat3 dmean_dt = Mat3::Identity();
    Mat3 dmean_dq = Mat3::Zero();
    std::array<Mat3, 3> dcov_domega{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
    std::array<Mat3, 3> dcov_dq{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
};

/// Link frames expressed in the base frame, one per link.
/// Throws JointOutOfRange when q leaves the limits by more than 1e-9.
std::vector<Pose> forward_kinematics(const ToolModel& model, const JointVector& q);

JointVector clamp_joints(const JointVector& q, const JointLimits& limits);

/// Jaws may not cross: q2 + q3 >= 0.
inline bool jaws_feasible(const JointVector& q) { return q[1] + q[2] >= 0.0; }

std::vector<PosedGaussian> pose_gaussians(const ToolModel& model, const Pose& pose,
                                          const JointVector& q);

std::vector<GaussianJacobian> jacobian_gaussians(const ToolModel& model, const Pose& pose,
                                                 const JointVector& q);

/// Rigidly moves already-posed Gaussians.
std::vector<PosedGaussian> transform(const Pose& pose, std::span<const PosedGaussian> gaussians);

/// Mean of the Gaussian centers in the base frame.
Vec3 model_centroid(const ToolModel& model, const JointVector& q);

/// Needle-driver-like stand-in: shaft stub, wrist pitch link and two mirrored
/// jaws, 92 Gaussians. Deterministic.
ToolModel default_tool_model();

/// Orientation that lays the tool axis along camera +x with the jaw opening
/// plane parallel to the image.
Rotation canonical_view_rotation();

}  // namespace toolpose
