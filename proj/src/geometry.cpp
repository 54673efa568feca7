#include "toolpose/geometry.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/SVD>

#include "toolpose/errors.hpp"

namespace toolpose {

Mat3 skew(const Vec3& v) {
    Mat3 s;
    // clang-format off
    s <<     0.0, -v.z(),  v.y(),
           v.z(),    0.0, -v.x(),
          -v.y(),  v.x(),    0.0;
    // clang-format on
    return s;
}

Rotation Rotation::from_matrix(const Mat3& m, double tol) {
    if (!m.allFinite()) {
        throw Error(ErrorCode::InvalidArgument, "rotation has non-finite entries");
    }
    const double ortho = (m.transpose() * m - Mat3::Identity()).norm();
    const double det = m.determinant();
    if (ortho > tol || std::abs(det - 1.0) > tol) {
        std::ostringstream os;
        os << "not a rotation (|R^T R - I|_F = " << ortho << ", det = " << det << ")";
        throw Error(ErrorCode::InvalidArgument, os.str());
    }
    return Rotation(m);
}

Rotation Rotation::nearest(const Mat3& m) {
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU();
    const Mat3& v = svd.matrixV();
    if ((u * v.transpose()).determinant() < 0.0) {
        u.col(2) = -u.col(2);
    }
    return Rotation(u * v.transpose());
}

Rotation Rotation::exp(const Vec3& omega) {
    const double theta = omega.norm();
    if (theta == 0.0) {
        return {};
    }
    const Mat3 k = skew(omega / theta);
    return Rotation(Mat3::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * k * k);
}

Rotation Rotation::about_axis(const Vec3& axis, double angle) {
    const double n = axis.norm();
    if (!(n > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "rotation axis must be non-zero");
    }
    return exp(axis / n * angle);
}

Vec3 Rotation::log() const {
    const Eigen::AngleAxisd aa(m_);
    return aa.axis() * aa.angle();
}

double Rotation::orthonormality_error() const {
    return (m_.transpose() * m_ - Mat3::Identity()).norm();
}

Pose Pose::from_matrix(const Mat4& m, double tol) {
    if (m(3, 0) != 0.0 || m(3, 1) != 0.0 || m(3, 2) != 0.0 || m(3, 3) != 1.0) {
        throw Error(ErrorCode::InvalidArgument, "homogeneous bottom row must be (0,0,0,1)");
    }
    const Vec3 t = m.block<3, 1>(0, 3);
    if (!t.allFinite()) {
        throw Error(ErrorCode::InvalidArgument, "translation has non-finite entries");
    }
    return {Rotation::from_matrix(m.block<3, 3>(0, 0), tol), t};
}

Mat4 Pose::matrix() const {
    Mat4 m = Mat4::Identity();
    m.block<3, 3>(0, 0) = rotation.matrix();
    m.block<3, 1>(0, 3) = translation;
    return m;
}

Pose Pose::operator*(const Pose& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
}

Pose compose(const Pose& a, const Pose& b) { return a * b; }

Pose invert(const Pose& p) {
    const Rotation rt = p.rotation.inverse();
    return {rt, -(rt * p.translation)};
}

double rotation_distance(const Rotation& a, const Rotation& b) {
    return (a.inverse() * b).angle();
}

Intrinsics Intrinsics::create(double fx, double fy, double cx, double cy, int width, int height) {
    Intrinsics k{fx, fy, cx, cy, width, height};
    k.validate();
    return k;
}

void Intrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
        throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive and finite");
    }
    if (!std::isfinite(cx) || !std::isfinite(cy)) {
        throw Error(ErrorCode::InvalidArgument, "principal point must be finite");
    }
    if (width < 1 || height < 1) {
        throw Error(ErrorCode::InvalidArgument, "image size must be at least 1x1");
    }
}

namespace {

void require_in_front(const Vec3& p, double z_min) {
    if (!(p.z() > z_min)) {
        std::ostringstream os;
        os << "point depth " << p.z() << " <= z_min " << z_min;
        throw Error(ErrorCode::BehindCamera, os.str());
    }
}

}  // namespace

Vec2 project(const Vec3& point_cam, const Intrinsics& k, double z_min) {
    require_in_front(point_cam, z_min);
    return {k.fx * point_cam.x() / point_cam.z() + k.cx, k.fy * point_cam.y() / point_cam.z() + k.cy};
}

Mat23 projection_jacobian(const Vec3& point_cam, const Intrinsics& k, double z_min) {
    require_in_front(point_cam, z_min);
    const double iz = 1.0 / point_cam.z();
    const double iz2 = iz * iz;
    Mat23 j;
    // clang-format off
    j << k.fx * iz, 0.0,       -k.fx * point_cam.x() * iz2,
         0.0,       k.fy * iz, -k.fy * point_cam.y() * iz2;
    // clang-format on
    return j;
}

Vec3 back_project(const Vec2& pixel, double depth, const Intrinsics& k) {
    return {(pixel.x() - k.cx) / k.fx * depth, (pixel.y() - k.cy) / k.fy * depth, depth};
}

Rotation apply_rotation_update(const Rotation& r, const Vec3& omega, double alpha) {
    const Vec3 step = alpha * omega;
    if (step.isZero(0.0)) {
        return r;
    }
    if (!step.allFinite()) {
        throw Error(ErrorCode::InvalidArgument, "rotation update is not finite");
    }
    return Rotation::nearest(r.matrix() * (Mat3::Identity() + skew(step)));
}

Vec3 clamp_vector(const Vec3& v, double lo, double hi) {
    if (!(lo <= hi)) {
        throw Error(ErrorCode::InvalidArgument, "clamp bounds require lo <= hi");
    }
    return v.cwiseMax(lo).cwiseMin(hi);
}

Intrinsics downscaled(const Intrinsics& k, int factor) {
    if (factor < 1) {
        throw Error(ErrorCode::InvalidArgument, "downscale factor must be >= 1");
    }
    const double f = factor;
    return Intrinsics::create(k.fx / f, k.fy / f, (k.cx + 0.5) / f - 0.5, (k.cy + 0.5) / f - 0.5, k.width / factor,
                              k.height / factor);
}

}  // namespace toolpose
