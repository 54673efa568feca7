#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace toolpose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

constexpr double kDefaultZMin = 1e-4;

/// [v]x such that skew(v) * u = v.cross(u).
Mat3 skew(const Vec3& v);

/// Element of SO(3). Construction through from_matrix() validates orthonormality
/// and determinant; the other factories produce rotations by construction.
class Rotation {
  public:
    Rotation() : m_(Mat3::Identity()) {}

    static Rotation identity() { return {}; }
    /// Throws InvalidArgument unless |R^T R - I|_F <= tol and |det R - 1| <= tol.
    static Rotation from_matrix(const Mat3& m, double tol = 1e-9);
    /// Nearest rotation in Frobenius norm (polar decomposition via SVD).
    static Rotation nearest(const Mat3& m);
    /// Rodrigues formula for exp([omega]x).
    static Rotation exp(const Vec3& omega);
    static Rotation about_axis(const Vec3& axis, double angle);
    static Rotation about_z(double angle) { return about_axis(Vec3::UnitZ(), angle); }

    const Mat3& matrix() const { return m_; }
    Rotation inverse() const { return Rotation(m_.transpose()); }
    /// Rotation vector (axis * angle), angle in [0, pi].
    Vec3 log() const;
    double angle() const { return log().norm(); }
    double orthonormality_error() const;

    Rotation operator*(const Rotation& other) const { return Rotation(m_ * other.m_); }
    Vec3 operator*(const Vec3& v) const { return m_ * v; }
    bool operator==(const Rotation& other) const { return m_ == other.m_; }

  private:
    explicit Rotation(const Mat3& m) : m_(m) {}
    Mat3 m_;
};

/// Rigid transform; maps points from its source frame into its target frame
/// (for the tracked pose T_CE: end-effector frame -> camera frame).
struct Pose {
    Rotation rotation;
    Vec3 translation = Vec3::Zero();

    static Pose identity() { return {}; }
    static Pose from_translation(const Vec3& t) { return {Rotation(), t}; }
    /// Validates the rotation block; bottom row must be exactly (0,0,0,1).
    static Pose from_matrix(const Mat4& m, double tol = 1e-9);

    Mat4 matrix() const;
    Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }
    Pose operator*(const Pose& other) const;
    bool operator==(const Pose& other) const {
        return rotation == other.rotation && translation == other.translation;
    }
};

Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& p);

/// Geodesic angle between two rotations, radians.
double rotation_distance(const Rotation& a, const Rotation& b);

struct Intrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;

    /// Throws InvalidArgument on fx, fy <= 0 or empty image size.
    static Intrinsics create(double fx, double fy, double cx, double cy, int width, int height);
    void validate() const;
    bool operator==(const Intrinsics&) const = default;
};

/// Pinhole projection to pixel coordinates; throws BehindCamera when z <= z_min.
Vec2 project(const Vec3& point_cam, const Intrinsics& k, double z_min = kDefaultZMin);

/// d(u,v)/d(x,y,z); throws BehindCamera when z <= z_min.
Mat23 projection_jacobian(const Vec3& point_cam, const Intrinsics& k, double z_min = kDefaultZMin);

/// Pixel (u,v) at depth z back to the camera frame.
Vec3 back_project(const Vec2& pixel, double depth, const Intrinsics& k);

/// Intrinsics of the image reduced by `factor` with downsample().
Intrinsics downscaled(const Intrinsics& k, int factor);

/// R * (I + alpha [omega]x), projected back onto SO(3). Returns r unchanged
/// (bit-identical) when alpha * omega is zero.
Rotation apply_rotation_update(const Rotation& r, const Vec3& omega, double alpha);

/// Componentwise clamp into [lo, hi]; requires lo <= hi.
Vec3 clamp_vector(const Vec3& v, double lo, double hi);

}  // namespace toolpose
