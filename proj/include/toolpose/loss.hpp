#pragma once

#include "toolpose/image.hpp"
#include "toolpose/renderer.hpp"

namespace toolpose {

struct LossConfig {
    double alpha_blend = 0.8;  // weight of the (1 - SSIM) term
    int ssim_window = 11;
    double ssim_sigma = 1.5;
    double ssim_c1 = 0.01 * 0.01;
    double ssim_c2 = 0.03 * 0.03;
    /// Rendered alpha above this marks a pixel as part of the rendering.
    double support_threshold = 0.01;

    void validate() const;
};

/// Mean SSIM over every window fully inside the image (Gaussian-weighted),
/// averaged over channels. Windows larger than the image shrink to the largest
/// odd size that fits. Throws DimensionMismatch on shape mismatch.
double ssim(const Image& a, const Image& b, const LossConfig& cfg = {});

/// Mean squared error over all pixels and channels.
double mse(const Image& a, const Image& b);

/// alpha * (1 - SSIM) + (1 - alpha) * MSE.
double combined_loss(const Image& rendered, const Image& observed, const LossConfig& cfg = {});

struct LossGradient {
    double loss = 0.0;
    double ssim = 1.0;
    double mse = 0.0;
    Image gradient;  // d loss / d rendered
};

LossGradient combined_loss_gradient(const Image& rendered, const Image& observed, const LossConfig& cfg = {});

/// Combined loss restricted to the support pixels (alpha > support_threshold):
/// SSIM averaged over support pixels that center a full window, squared error
/// averaged over all support pixels.
struct SupportLoss {
    double alpha_blend = 0.8;
    double ssim_sum = 0.0;
    std::size_t ssim_count = 0;
    double squared_error_sum = 0.0;  // summed over channels
    int channels = 3;
    std::size_t pixels = 0;

    /// +infinity when the support is empty.
    double average() const;
    /// average() * pixels; grows with the rendered area.
    double total() const;
};

SupportLoss support_loss(const Image& rendered, const Image& alpha, const Image& observed,
                         const LossConfig& cfg = {});

/// Combined loss per rendered pixel; never favours hypotheses just because they
/// cover more pixels. +infinity when nothing was rendered.
double pixel_averaged_loss(const RenderOutput& rendered, const Image& observed, const LossConfig& cfg = {});

}  // namespace toolpose
