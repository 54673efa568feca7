#pragma once

#include <span>
#include <vector>

#include "toolpose/geometry.hpp"
#include "toolpose/image.hpp"
#include "toolpose/tool_model.hpp"

namespace toolpose {

using Mat2 = Eigen::Matrix2d;

struct RenderSettings {
    Vec3 background = Vec3::Zero();
    /// Per-Gaussian alpha below this value is skipped. Zero makes the image a
    /// smooth function of the Gaussian parameters.
    double alpha_cutoff = 1.0 / 255.0;
    double z_min = kDefaultZMin;
};

/// Screen-space footprint of one Gaussian (EWA projection).
struct ProjectedGaussian {
    bool visible = false;
    Vec2 mean = Vec2::Zero();
    Mat2 cov = Mat2::Identity();
    Mat2 conic = Mat2::Identity();  // cov^-1
    Mat23 jacobian = Mat23::Zero();
    double depth = 0.0;
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel bounds
};

/// Everything the backward pass needs to replay the compositing of a render.
struct SplatCache {
    RenderSettings settings;
    Intrinsics intrinsics;
    std::size_t gaussian_count = 0;
    std::vector<ProjectedGaussian> projected;
    std::vector<int> order;  // visible Gaussians, front to back
    int tile_size = 16;
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<std::vector<int>> tiles;  // Gaussian indices per tile, front to back
};

struct RenderOutput {
    Frame image;
    Image alpha;  // single channel, 1 - final transmittance
    SplatCache cache;
};

/// Splats the Gaussians front to back by camera-frame depth (ties by index).
/// Gaussians with depth <= z_min are culled.
RenderOutput render(std::span<const PosedGaussian> gaussians, const Intrinsics& k,
                    const RenderSettings& settings = {});

/// Loss gradient with respect to one posed Gaussian.
struct GaussianGradient {
    Vec3 mean_cam = Vec3::Zero();
    Mat3 cov_cam = Mat3::Zero();
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
};

struct PoseGradient {
    Vec3 omega = Vec3::Zero();
    Vec3 translation = Vec3::Zero();
    Vec3 joints = Vec3::Zero();
};

/// Per-Gaussian gradients from dL/dimage. Throws StaleCache when the Gaussian
/// list does not match the cache, DimensionMismatch on a wrong gradient shape.
std::vector<GaussianGradient> render_backward_gaussians(const RenderOutput& out, const Image& dl_dimage,
                                                        std::span<const PosedGaussian> gaussians);

/// Gradients with respect to the tangent pose update (omega, delta_t) and the joints.
PoseGradient render_backward(const RenderOutput& out, const Image& dl_dimage,
                             std::span<const PosedGaussian> gaussians,
                             std::span<const GaussianJacobian> jacobians);

/// Contracts per-Gaussian gradients with the kinematic Jacobians.
PoseGradient chain_pose_gradient(std::span<const GaussianGradient> grads,
                                 std::span<const GaussianJacobian> jacobians);

/// Mask of pixels whose rendered alpha exceeds the threshold.
Mask alpha_mask(const Image& alpha, double threshold);

}  // namespace toolpose
