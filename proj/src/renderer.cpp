#include "toolpose/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "toolpose/errors.hpp"

namespace toolpose {

namespace {

struct Contribution {
    int index;
    double alpha;
    double falloff;  // exp(power)
    double transmittance;  // before this Gaussian
    Vec2 offset;  // pixel - mean
};

// Returns false when the Gaussian is skipped at this pixel.
inline bool splat_alpha(const ProjectedGaussian& p, double opacity, double cutoff, double px, double py,
                        double& alpha, double& falloff, Vec2& d) {
    d = Vec2(px - p.mean.x(), py - p.mean.y());
    const double power =
        -0.5 * (p.conic(0, 0) * d.x() * d.x() + 2.0 * p.conic(0, 1) * d.x() * d.y() + p.conic(1, 1) * d.y() * d.y());
    falloff = std::exp(power);
    alpha = opacity * falloff;
    return !(alpha < cutoff);
}

ProjectedGaussian project_gaussian(const PosedGaussian& g, const Intrinsics& k, const RenderSettings& s) {
    ProjectedGaussian p;
    p.depth = g.mean_cam.z();
    if (!(g.mean_cam.z() > s.z_min) || !g.mean_cam.allFinite() || !g.cov_cam.allFinite()) {
        return p;
    }
    if (s.alpha_cutoff > 0.0 && g.opacity < s.alpha_cutoff) {
        return p;
    }
    p.jacobian = projection_jacobian(g.mean_cam, k, s.z_min);
    p.mean = project(g.mean_cam, k, s.z_min);
    p.cov = p.jacobian * g.cov_cam * p.jacobian.transpose();
    p.cov = 0.5 * (p.cov + p.cov.transpose()).eval();
    const double det = p.cov.determinant();
    if (!(det > 0.0) || !std::isfinite(det)) {
        return p;
    }
    p.conic = p.cov.inverse();
    if (s.alpha_cutoff > 0.0) {
        const double r2 = 2.0 * std::log(g.opacity / s.alpha_cutoff);
        const double dx = std::sqrt(std::max(0.0, r2 * p.cov(0, 0)));
        const double dy = std::sqrt(std::max(0.0, r2 * p.cov(1, 1)));
        p.x0 = std::max(0, static_cast<int>(std::ceil(p.mean.x() - dx)));
        p.x1 = std::min(k.width - 1, static_cast<int>(std::floor(p.mean.x() + dx)));
        p.y0 = std::max(0, static_cast<int>(std::ceil(p.mean.y() - dy)));
        p.y1 = std::min(k.height - 1, static_cast<int>(std::floor(p.mean.y() + dy)));
    } else {
        p.x0 = 0;
        p.x1 = k.width - 1;
        p.y0 = 0;
        p.y1 = k.height - 1;
    }
    p.visible = p.x0 <= p.x1 && p.y0 <= p.y1;
    return p;
}

// Front-to-back list of contributions at a pixel.
void gather(const SplatCache& cache, std::span<const PosedGaussian> gaussians, int x, int y,
            std::vector<Contribution>& out) {
    out.clear();
    const int tile = (y / cache.tile_size) * cache.tiles_x + x / cache.tile_size;
    double t = 1.0;
    for (int gi : cache.tiles[static_cast<std::size_t>(tile)]) {
        const ProjectedGaussian& p = cache.projected[static_cast<std::size_t>(gi)];
        if (x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1) {
            continue;
        }
        double alpha = 0.0, falloff = 0.0;
        Vec2 d;
        if (!splat_alpha(p, gaussians[static_cast<std::size_t>(gi)].opacity, cache.settings.alpha_cutoff, x, y,
                         alpha, falloff, d)) {
            continue;
        }
        out.push_back({gi, alpha, falloff, t, d});
        t *= 1.0 - alpha;
    }
}

}  // namespace

RenderOutput render(std::span<const PosedGaussian> gaussians, const Intrinsics& k, const RenderSettings& settings) {
    k.validate();
    RenderOutput out;
    SplatCache& cache = out.cache;
    cache.settings = settings;
    cache.intrinsics = k;
    cache.gaussian_count = gaussians.size();
    cache.projected.reserve(gaussians.size());
    for (const PosedGaussian& g : gaussians) {
        cache.projected.push_back(project_gaussian(g, k, settings));
    }
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        if (cache.projected[i].visible) {
            cache.order.push_back(static_cast<int>(i));
        }
    }
    std::stable_sort(cache.order.begin(), cache.order.end(), [&](int a, int b) {
        return cache.projected[static_cast<std::size_t>(a)].depth < cache.projected[static_cast<std::size_t>(b)].depth;
    });

    cache.tiles_x = (k.width + cache.tile_size - 1) / cache.tile_size;
    cache.tiles_y = (k.height + cache.tile_size - 1) / cache.tile_size;
    cache.tiles.assign(static_cast<std::size_t>(cache.tiles_x * cache.tiles_y), {});
    for (int gi : cache.order) {
        const ProjectedGaussian& p = cache.projected[static_cast<std::size_t>(gi)];
        for (int ty = p.y0 / cache.tile_size; ty <= p.y1 / cache.tile_size; ++ty) {
            for (int tx = p.x0 / cache.tile_size; tx <= p.x1 / cache.tile_size; ++tx) {
                cache.tiles[static_cast<std::size_t>(ty * cache.tiles_x + tx)].push_back(gi);
            }
        }
    }

    out.image.pixels = Image(k.width, k.height, 3);
    out.alpha = Image(k.width, k.height, 1);
    std::vector<Contribution> contribs;
    for (int y = 0; y < k.height; ++y) {
        for (int x = 0; x < k.width; ++x) {
            gather(cache, gaussians, x, y, contribs);
            Vec3 c = Vec3::Zero();
            double t = 1.0;
            for (const Contribution& ct : contribs) {
                c += gaussians[static_cast<std::size_t>(ct.index)].color * (ct.alpha * ct.transmittance);
                t = ct.transmittance * (1.0 - ct.alpha);
            }
            c += t * settings.background;
            double* px = out.image.pixels.pixel(x, y);
            px[0] = c.x();
            px[1] = c.y();
            px[2] = c.z();
            out.alpha(x, y) = 1.0 - t;
        }
    }
    return out;
}

std::vector<GaussianGradient> render_backward_gaussians(const RenderOutput& out, const Image& dl_dimage,
                                                        std::span<const PosedGaussian> gaussians) {
    const SplatCache& cache = out.cache;
    if (gaussians.size() != cache.gaussian_count) {
        throw Error(ErrorCode::StaleCache, "gaussian count does not match the render cache");
    }
    if (!dl_dimage.same_shape(out.image.pixels)) {
        throw Error(ErrorCode::DimensionMismatch, "image gradient shape does not match the render");
    }
    const std::size_t n = gaussians.size();
    std::vector<Vec2> g_mean2d(n, Vec2::Zero());
    std::vector<Mat2> g_conic(n, Mat2::Zero());
    std::vector<GaussianGradient> grads(n);

    const Vec3& bg = cache.settings.background;
    std::vector<Contribution> contribs;
    for (int y = 0; y < out.image.pixels.height(); ++y) {
        for (int x = 0; x < out.image.pixels.width(); ++x) {
            const double* dp = dl_dimage.pixel(x, y);
            const Vec3 dl_dc(dp[0], dp[1], dp[2]);
            if (dl_dc.isZero(0.0)) {
                continue;
            }
            gather(cache, gaussians, x, y, contribs);
            Vec3 behind = bg;  // composite of everything behind the current Gaussian
            for (auto it = contribs.rbegin(); it != contribs.rend(); ++it) {
                const auto i = static_cast<std::size_t>(it->index);
                const Vec3& color = gaussians[i].color;
                const double dl_dalpha = it->transmittance * dl_dc.dot(color - behind);
                grads[i].color += (it->alpha * it->transmittance) * dl_dc;
                grads[i].opacity += dl_dalpha * it->falloff;
                const double dl_dpower = dl_dalpha * it->alpha;
                const Mat2& a = cache.projected[i].conic;
                g_mean2d[i] += dl_dpower * (a * it->offset);
                g_conic[i] += (-0.5 * dl_dpower) * (it->offset * it->offset.transpose());
                behind = it->alpha * color + (1.0 - it->alpha) * behind;
            }
        }
    }

    const Intrinsics& k = cache.intrinsics;
    for (std::size_t i = 0; i < n; ++i) {
        const ProjectedGaussian& p = cache.projected[i];
        if (!p.visible) {
            continue;
        }
        const PosedGaussian& g = gaussians[i];
        const Mat2 g_cov2d = -p.conic * g_conic[i] * p.conic;
        const Mat23& j = p.jacobian;
        grads[i].cov_cam = j.transpose() * g_cov2d * j;

        // Mean enters through the projected center and through J(mean).
        Vec3 g_mean = j.transpose() * g_mean2d[i];
        const Eigen::Matrix<double, 2, 3> m = 2.0 * g_cov2d * j * g.cov_cam;
        const double x = g.mean_cam.x(), yv = g.mean_cam.y(), z = g.mean_cam.z();
        const double iz2 = 1.0 / (z * z);
        const double iz3 = iz2 / z;
        g_mean.x() += m(0, 2) * (-k.fx * iz2);
        g_mean.y() += m(1, 2) * (-k.fy * iz2);
        g_mean.z() += m(0, 0) * (-k.fx * iz2) + m(0, 2) * (2.0 * k.fx * x * iz3) + m(1, 1) * (-k.fy * iz2) +
                      m(1, 2) * (2.0 * k.fy * yv * iz3);
        grads[i].mean_cam = g_mean;
    }
    return grads;
}

PoseGradient chain_pose_gradient(std::span<const GaussianGradient> grads, std::span<const GaussianJacobian> jacobians) {
    if (grads.size() != jacobians.size()) {
        throw Error(ErrorCode::StaleCache, "jacobian count does not match the gaussian count");
    }
    PoseGradient pg;
    for (std::size_t i = 0; i < grads.size(); ++i) {
        const GaussianGradient& g = grads[i];
        const GaussianJacobian& jac = jacobians[i];
        pg.omega += jac.dmean_domega.transpose() * g.mean_cam;
        pg.translation += jac.dmean_dt.transpose() * g.mean_cam;
        pg.joints += jac.dmean_dq.transpose() * g.mean_cam;
        for (std::size_t k = 0; k < 3; ++k) {
            pg.omega[static_cast<Eigen::Index>(k)] += g.cov_cam.cwiseProduct(jac.dcov_domega[k]).sum();
            pg.joints[static_cast<Eigen::Index>(k)] += g.cov_cam.cwiseProduct(jac.dcov_dq[k]).sum();
        }
    }
    return pg;
}

PoseGradient render_backward(const RenderOutput& out, const Image& dl_dimage, std::span<const PosedGaussian> gaussians,
                             std::span<const GaussianJacobian> jacobians) {
    if (jacobians.size() != gaussians.size()) {
        throw Error(ErrorCode::StaleCache, "jacobian count does not match the gaussian count");
    }
    const std::vector<GaussianGradient> grads = render_backward_gaussians(out, dl_dimage, gaussians);
    return chain_pose_gradient(grads, jacobians);
}

Mask alpha_mask(const Image& alpha, double threshold) {
    Mask m(alpha.width(), alpha.height());
    for (int y = 0; y < alpha.height(); ++y) {
        for (int x = 0; x < alpha.width(); ++x) {
            m.set(x, y, alpha(x, y) > threshold);
        }
    }
    return m;
}

}  // namespace toolpose
