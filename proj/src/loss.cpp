#include "toolpose/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "toolpose/errors.hpp"

namespace toolpose {

namespace {

using Plane = std::vector<double>;

void require_same_shape(const Image& a, const Image& b) {
    if (!a.same_shape(b)) {
        throw Error(ErrorCode::DimensionMismatch, "images differ in shape");
    }
}

std::vector<double> gaussian_kernel(int window, double sigma) {
    std::vector<double> k(static_cast<std::size_t>(window));
    const int r = window / 2;
    double sum = 0.0;
    for (int i = 0; i < window; ++i) {
        const double d = i - r;
        k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += k[static_cast<std::size_t>(i)];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable "valid" filtering: (h, w) -> (h - n + 1, w - n + 1).
Plane filter_valid(const Plane& in, int w, int h, const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int wv = w - n + 1, hv = h - n + 1;
    Plane tmp(static_cast<std::size_t>(h) * wv, 0.0);
    for (int y = 0; y < h; ++y) {
        const double* row = in.data() + static_cast<std::size_t>(y) * w;
        double* o = tmp.data() + static_cast<std::size_t>(y) * wv;
        for (int i = 0; i < n; ++i) {
            const double ki = k[static_cast<std::size_t>(i)];
            for (int x = 0; x < wv; ++x) o[x] += ki * row[x + i];
        }
    }
    Plane out(static_cast<std::size_t>(hv) * wv, 0.0);
    for (int y = 0; y < hv; ++y) {
        double* o = out.data() + static_cast<std::size_t>(y) * wv;
        for (int i = 0; i < n; ++i) {
            const double ki = k[static_cast<std::size_t>(i)];
            const double* row = tmp.data() + static_cast<std::size_t>(y + i) * wv;
            for (int x = 0; x < wv; ++x) o[x] += ki * row[x];
        }
    }
    return out;
}

// Adjoint of filter_valid: (h - n + 1, w - n + 1) -> (h, w).
Plane filter_valid_adjoint(const Plane& in, int w, int h, const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int wv = w - n + 1, hv = h - n + 1;
    Plane tmp(static_cast<std::size_t>(h) * wv, 0.0);
    for (int y = 0; y < hv; ++y) {
        const double* row = in.data() + static_cast<std::size_t>(y) * wv;
        for (int i = 0; i < n; ++i) {
            const double ki = k[static_cast<std::size_t>(i)];
            double* o = tmp.data() + static_cast<std::size_t>(y + i) * wv;
            for (int x = 0; x < wv; ++x) o[x] += ki * row[x];
        }
    }
    Plane out(static_cast<std::size_t>(h) * w, 0.0);
    for (int y = 0; y < h; ++y) {
        const double* row = tmp.data() + static_cast<std::size_t>(y) * wv;
        double* o = out.data() + static_cast<std::size_t>(y) * w;
        for (int i = 0; i < n; ++i) {
            const double ki = k[static_cast<std::size_t>(i)];
            for (int x = 0; x < wv; ++x) o[x + i] += ki * row[x];
        }
    }
    return out;
}

int effective_window(const Image& img, const LossConfig& cfg) {
    int w = std::min({cfg.ssim_window, img.width(), img.height()});
    if (w % 2 == 0) --w;
    return std::max(w, 1);
}

// Local SSIM statistics for one channel.
struct ChannelSsim {
    Plane mu_a, mu_b, var_a, var_b, cov_ab, s;
};

Plane channel_plane(const Image& img, int c) {
    Plane p(static_cast<std::size_t>(img.width()) * img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            p[static_cast<std::size_t>(y) * img.width() + x] = img(x, y, c);
        }
    }
    return p;
}

ChannelSsim channel_ssim(const Plane& a, const Plane& b, int w, int h, const std::vector<double>& k,
                         const LossConfig& cfg) {
    Plane aa(a.size()), bb(a.size()), ab(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    ChannelSsim cs;
    cs.mu_a = filter_valid(a, w, h, k);
    cs.mu_b = filter_valid(b, w, h, k);
    cs.var_a = filter_valid(aa, w, h, k);
    cs.var_b = filter_valid(bb, w, h, k);
    cs.cov_ab = filter_valid(ab, w, h, k);
    cs.s.resize(cs.mu_a.size());
    for (std::size_t i = 0; i < cs.s.size(); ++i) {
        const double ma = cs.mu_a[i], mb = cs.mu_b[i];
        cs.var_a[i] -= ma * ma;
        cs.var_b[i] -= mb * mb;
        cs.cov_ab[i] -= ma * mb;
        const double num = (2.0 * ma * mb + cfg.ssim_c1) * (2.0 * cs.cov_ab[i] + cfg.ssim_c2);
        const double den = (ma * ma + mb * mb + cfg.ssim_c1) * (cs.var_a[i] + cs.var_b[i] + cfg.ssim_c2);
        cs.s[i] = num / den;
    }
    return cs;
}

// Channel-averaged SSIM value per valid window center.
Plane ssim_map(const Image& a, const Image& b, const LossConfig& cfg, int& window) {
    window = effective_window(a, cfg);
    const auto k = gaussian_kernel(window, cfg.ssim_sigma);
    const int w = a.width(), h = a.height();
    Plane map(static_cast<std::size_t>(w - window + 1) * (h - window + 1), 0.0);
    for (int c = 0; c < a.channels(); ++c) {
        const ChannelSsim cs = channel_ssim(channel_plane(a, c), channel_plane(b, c), w, h, k, cfg);
        for (std::size_t i = 0; i < map.size(); ++i) map[i] += cs.s[i];
    }
    for (double& v : map) v /= a.channels();
    return map;
}

}  // namespace

void LossConfig::validate() const {
    if (!(alpha_blend >= 0.0 && alpha_blend <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "alpha_blend must lie in [0, 1]");
    }
    if (ssim_window < 3 || ssim_window % 2 == 0) {
        throw Error(ErrorCode::InvalidArgument, "ssim_window must be odd and >= 3");
    }
    if (!(ssim_sigma > 0.0) || !(ssim_c1 > 0.0) || !(ssim_c2 > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "ssim sigma and stabilizers must be positive");
    }
}

double ssim(const Image& a, const Image& b, const LossConfig& cfg) {
    require_same_shape(a, b);
    int window = 0;
    const Plane map = ssim_map(a, b, cfg, window);
    double sum = 0.0;
    for (double v : map) sum += v;
    return sum / static_cast<double>(map.size());
}

double mse(const Image& a, const Image& b) {
    require_same_shape(a, b);
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        sum += d * d;
    }
    return sum / static_cast<double>(a.size());
}

double combined_loss(const Image& rendered, const Image& observed, const LossConfig& cfg) {
    require_same_shape(rendered, observed);
    const double a = cfg.alpha_blend;
    const double ssim_term = a == 0.0 ? 0.0 : a * (1.0 - ssim(rendered, observed, cfg));
    return ssim_term + (1.0 - a) * mse(rendered, observed);
}

LossGradient combined_loss_gradient(const Image& rendered, const Image& observed, const LossConfig& cfg) {
    require_same_shape(rendered, observed);
    const int w = rendered.width(), h = rendered.height(), nc = rendered.channels();
    LossGradient out;
    out.gradient = Image(w, h, nc);
    const double a = cfg.alpha_blend;
    const double n = static_cast<double>(rendered.size());

    out.mse = mse(rendered, observed);
    for (std::size_t i = 0; i < rendered.size(); ++i) {
        out.gradient.data()[i] = (1.0 - a) * 2.0 * (rendered.data()[i] - observed.data()[i]) / n;
    }

    const int window = effective_window(rendered, cfg);
    const auto k = gaussian_kernel(window, cfg.ssim_sigma);
    const std::size_t centers = static_cast<std::size_t>(w - window + 1) * (h - window + 1);
    const double dl_ds = -a / (static_cast<double>(centers) * nc);
    double ssim_sum = 0.0;
    for (int c = 0; c < nc; ++c) {
        const Plane pa = channel_plane(rendered, c);
        const Plane pb = channel_plane(observed, c);
        const ChannelSsim cs = channel_ssim(pa, pb, w, h, k, cfg);
        Plane g_mu(centers), g_sq(centers), g_cross(centers);
        for (std::size_t i = 0; i < centers; ++i) {
            ssim_sum += cs.s[i];
            const double ma = cs.mu_a[i], mb = cs.mu_b[i];
            const double a1 = 2.0 * ma * mb + cfg.ssim_c1;
            const double a2 = 2.0 * cs.cov_ab[i] + cfg.ssim_c2;
            const double b1 = ma * ma + mb * mb + cfg.ssim_c1;
            const double b2 = cs.var_a[i] + cs.var_b[i] + cfg.ssim_c2;
            const double s = cs.s[i];
            // Grouped so that identical windows (a1 == b1, a2 == b2, s == 1)
            // give a gradient that cancels to exactly zero.
            const double ds_dmu = 2.0 * (mb * (a2 / b2) - ma * s) / b1;
            const double ds_dvar = -s / b2;
            const double ds_dcov = 2.0 * (a1 / b1) / b2;
            // Chain through var = E[a^2] - mu_a^2 and cov = E[ab] - mu_a mu_b.
            g_mu[i] = dl_ds * (ds_dmu - 2.0 * ma * ds_dvar - mb * ds_dcov);
            g_sq[i] = dl_ds * ds_dvar;
            g_cross[i] = dl_ds * ds_dcov;
        }
        const Plane t_mu = filter_valid_adjoint(g_mu, w, h, k);
        const Plane t_sq = filter_valid_adjoint(g_sq, w, h, k);
        const Plane t_cross = filter_valid_adjoint(g_cross, w, h, k);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                out.gradient(x, y, c) += t_mu[i] + 2.0 * pa[i] * t_sq[i] + pb[i] * t_cross[i];
            }
        }
    }
    out.ssim = ssim_sum / (static_cast<double>(centers) * nc);
    out.loss = (a == 0.0 ? 0.0 : a * (1.0 - out.ssim)) + (1.0 - a) * out.mse;
    return out;
}

double SupportLoss::average() const {
    if (pixels == 0) {
        return std::numeric_limits<double>::infinity();
    }
    const double ssim_term = ssim_count == 0 ? 0.0 : alpha_blend * (1.0 - ssim_sum / static_cast<double>(ssim_count));
    return ssim_term + (1.0 - alpha_blend) * squared_error_sum / (static_cast<double>(pixels) * channels);
}

double SupportLoss::total() const { return pixels == 0 ? 0.0 : average() * static_cast<double>(pixels); }

SupportLoss support_loss(const Image& rendered, const Image& alpha, const Image& observed, const LossConfig& cfg) {
    require_same_shape(rendered, observed);
    if (alpha.width() != rendered.width() || alpha.height() != rendered.height()) {
        throw Error(ErrorCode::DimensionMismatch, "alpha map differs in shape from the rendering");
    }
    int window = 0;
    const Plane map = ssim_map(rendered, observed, cfg, window);
    const int r = window / 2;
    const int wv = rendered.width() - window + 1;
    const int hv = rendered.height() - window + 1;

    SupportLoss out;
    out.alpha_blend = cfg.alpha_blend;
    out.channels = rendered.channels();
    for (int y = 0; y < rendered.height(); ++y) {
        for (int x = 0; x < rendered.width(); ++x) {
            if (!(alpha(x, y) > cfg.support_threshold)) {
                continue;
            }
            for (int c = 0; c < rendered.channels(); ++c) {
                const double d = rendered(x, y, c) - observed(x, y, c);
                out.squared_error_sum += d * d;
            }
            ++out.pixels;
            const int xc = x - r, yc = y - r;
            if (xc >= 0 && yc >= 0 && xc < wv && yc < hv) {
                out.ssim_sum += map[static_cast<std::size_t>(yc) * wv + xc];
                ++out.ssim_count;
            }
        }
    }
    return out;
}

double pixel_averaged_loss(const RenderOutput& rendered, const Image& observed, const LossConfig& cfg) {
    return support_loss(rendered.image.pixels, rendered.alpha, observed, cfg).average();
}

}  // namespace toolpose
