#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <algorithm>
#include <random>
#include <vector>
#include <string>

#include <Eigen/Geometry>

#include "toolpose/geometry.hpp"
#include "toolpose/image.hpp"
#include "toolpose/renderer.hpp"
#include "toolpose/synthlab.hpp"
#include "toolpose/tool_model.hpp"

namespace testing {

using namespace toolpose;

inline Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec3 v(n(rng), n(rng), n(rng));
    return v.normalized();
}

// Rotation built with Eigen's own angle-axis code, independent of Rotation::exp.
inline Mat3 eigen_rotation(const Vec3& rotvec) {
    const double a = rotvec.norm();
    if (a == 0.0) return Mat3::Identity();
    return Eigen::AngleAxisd(a, rotvec / a).toRotationMatrix();
}

inline Pose random_pose(std::mt19937_64& rng, double max_t = 1.0) {
    std::uniform_real_distribution<double> angle(0.0, 3.0);
    std::uniform_real_distribution<double> t(-max_t, max_t);
    return {Rotation::exp(random_unit(rng) * angle(rng)), Vec3(t(rng), t(rng), t(rng))};
}

// Default tool viewed side-on with its centroid at `depth` on the optical axis.
inline Pose view_pose(const ToolModel& model, const JointVector& q, double depth = 0.10,
                      const Rotation& r = canonical_view_rotation()) {
    return {r, Vec3(0.0, 0.0, depth) - r * model_centroid(model, q)};
}

inline Intrinsics camera(int size, double focal) {
    return CameraSpec{size, size, focal}.intrinsics();
}

inline Image render_image(const ToolModel& model, const Pose& pose, const JointVector& q, const Intrinsics& k,
                          const RenderSettings& s = {}) {
    return render(pose_gaussians(model, pose, q), k, s).image.pixels;
}

inline Mask render_mask(const ToolModel& model, const Pose& pose, const JointVector& q, const Intrinsics& k) {
    return alpha_mask(render(pose_gaussians(model, pose, q), k).alpha, 0.01);
}

inline std::vector<PosedGaussian> random_scene(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<PosedGaussian> out;
    for (int i = 0; i < n; ++i) {
        PosedGaussian g;
        const double z = 0.5 + u(rng);
        g.mean_cam = Vec3((u(rng) - 0.5) * 0.4 * z, (u(rng) - 0.5) * 0.4 * z, z);
        const Mat3 r = Rotation::exp(random_unit(rng) * 3.0 * u(rng)).matrix();
        const Vec3 s(0.005 + 0.05 * u(rng), 0.005 + 0.05 * u(rng), 0.005 + 0.05 * u(rng));
        g.cov_cam = r * s.cwiseAbs2().asDiagonal() * r.transpose();
        g.opacity = u(rng);
        g.color = Vec3(u(rng), u(rng), u(rng));
        out.push_back(g);
    }
    return out;
}

// Straight evaluation of the splatting model, composited back to front with
// the "over" operator. Shares no code with the renderer.
inline void reference_render(const std::vector<PosedGaussian>& gs, const Intrinsics& k, const RenderSettings& s,
                      Image& color, Image& alpha) {
    std::vector<int> idx(gs.size());
    for (std::size_t i = 0; i < gs.size(); ++i) idx[i] = static_cast<int>(i);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return gs[a].mean_cam.z() < gs[b].mean_cam.z(); });
    color = Image(k.width, k.height, 3);
    alpha = Image(k.width, k.height, 1);
    for (int y = 0; y < k.height; ++y) {
        for (int x = 0; x < k.width; ++x) {
            Vec3 c = s.background;
            double t = 1.0;
            for (auto it = idx.rbegin(); it != idx.rend(); ++it) {
                const PosedGaussian& g = gs[static_cast<std::size_t>(*it)];
                const Vec3& m = g.mean_cam;
                if (!(m.z() > s.z_min)) continue;
                Eigen::Matrix<double, 2, 3> j;
                j << k.fx / m.z(), 0, -k.fx * m.x() / (m.z() * m.z()), 0, k.fy / m.z(), -k.fy * m.y() / (m.z() * m.z());
                const Eigen::Matrix2d cov = j * g.cov_cam * j.transpose();
                const Eigen::Vector2d d(x - (k.fx * m.x() / m.z() + k.cx), y - (k.fy * m.y() / m.z() + k.cy));
                const double a = g.opacity * std::exp(-0.5 * d.dot(cov.inverse() * d));
                if (a < s.alpha_cutoff) continue;
                c = a * g.color + (1.0 - a) * c;
                t *= 1.0 - a;
            }
            for (int ch = 0; ch < 3; ++ch) color(x, y, ch) = c[ch];
            alpha(x, y) = 1.0 - t;
        }
    }
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("toolpose_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::FILE* f = std::fopen(p.string().c_str(), "rb");
    std::string s;
    if (!f) return s;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) s.append(buf, n);
    std::fclose(f);
    return s;
}

}  // namespace testing
