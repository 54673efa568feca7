#include <limits>
#include <random>

#include "doctest.h"
#include "support.hpp"
#include "toolpose/errors.hpp"
#include "toolpose/loss.hpp"

using namespace toolpose;

namespace {

Image random_image(std::mt19937_64& rng, int w, int h) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image img(w, h, 3);
    for (double& v : img.data()) v = u(rng);
    return img;
}

Image smooth_image(std::mt19937_64& rng, int w, int h) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double a = u(rng), b = u(rng), c = u(rng);
    Image img(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < 3; ++ch)
                img(x, y, ch) = 0.5 + 0.4 * std::sin(a * x + b * y + c * ch + ch);
    return img;
}

}  // namespace

TEST_CASE("ssim of identical images is exactly one") {
    std::mt19937_64 rng(21);
    const Image a = random_image(rng, 20, 17);
    CHECK(ssim(a, a) == 1.0);
}

TEST_CASE("ssim is symmetric") {
    std::mt19937_64 rng(22);
    const Image a = random_image(rng, 20, 17), b = random_image(rng, 20, 17);
    CHECK(std::abs(ssim(a, b) - ssim(b, a)) <= 1e-12);
    CHECK(ssim(a, b) <= 1.0);
    CHECK(ssim(a, b) >= -1.0);
}

TEST_CASE("ssim of constant images reduces to the luminance term") {
    const LossConfig cfg;
    for (auto [ca, cb] : {std::pair{0.2, 0.7}, std::pair{0.0, 0.5}, std::pair{0.9, 0.4}}) {
        const Image a(16, 16, 3, ca), b(16, 16, 3, cb);
        const double expected = (2 * ca * cb + cfg.ssim_c1) / (ca * ca + cb * cb + cfg.ssim_c1);
        CHECK(ssim(a, b, cfg) == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("ssim rejects mismatched shapes") {
    CHECK_THROWS_AS(ssim(Image(10, 10, 3), Image(11, 10, 3)), Error);
}

TEST_CASE("combined loss") {
    std::mt19937_64 rng(23);
    const Image a = random_image(rng, 24, 24), b = random_image(rng, 24, 24);
    CHECK(std::abs(combined_loss(a, a)) <= 1e-12);

    LossConfig mse_only;
    mse_only.alpha_blend = 0.0;
    CHECK(combined_loss(a, b, mse_only) == mse(a, b));

    const double s = ssim(a, b), m = mse(a, b);
    CHECK(combined_loss(a, b) == doctest::Approx(0.8 * (1 - s) + 0.2 * m).epsilon(1e-14));
    CHECK(0.8 * 0.2 + 0.2 * 0.01 == doctest::Approx(0.162).epsilon(1e-15));
    CHECK(combined_loss(a, b) >= 0.0);
}

TEST_CASE("combined loss gradient matches finite differences") {
    std::mt19937_64 rng(24);
    const Image a = smooth_image(rng, 16, 14), b = smooth_image(rng, 16, 14);
    const LossGradient g = combined_loss_gradient(a, b);
    CHECK(g.loss == doctest::Approx(combined_loss(a, b)).epsilon(1e-14));
    std::uniform_int_distribution<std::size_t> pick(0, a.size() - 1);
    const double h = 1e-6;
    for (int i = 0; i < 40; ++i) {
        const std::size_t p = pick(rng);
        Image ap = a, am = a;
        ap.data()[p] += h;
        am.data()[p] -= h;
        const double fd = (combined_loss(ap, b) - combined_loss(am, b)) / (2 * h);
        CHECK(std::abs(fd - g.gradient.data()[p]) <= 1e-6 * std::max(std::abs(fd), 1e-4));
    }
}

TEST_CASE("pixel averaged loss over full support equals the combined loss") {
    std::mt19937_64 rng(25);
    RenderOutput out;
    out.image.pixels = random_image(rng, 20, 20);
    out.alpha = Image(20, 20, 1, 0.5);
    const Image obs = random_image(rng, 20, 20);
    CHECK(pixel_averaged_loss(out, obs) == doctest::Approx(combined_loss(out.image.pixels, obs)).epsilon(1e-12));
}

TEST_CASE("empty support gives the infinite sentinel") {
    const auto out = render(std::vector<PosedGaussian>{}, testing::camera(16, 20));
    CHECK(pixel_averaged_loss(out, Image(16, 16, 3, 0.3)) == std::numeric_limits<double>::infinity());
}

TEST_CASE("pixel averaged loss removes the near-camera size bias") {
    const ToolModel m = default_tool_model();
    const JointVector q = JointVector::Zero();
    const Intrinsics k = testing::camera(128, 200);
    LossConfig cfg;
    cfg.alpha_blend = 0.0;
    double avg[2], total[2];
    int i = 0;
    for (double depth : {0.08, 0.14}) {
        const auto out = render(pose_gaussians(m, testing::view_pose(m, q, depth), q), k);
        // Observation differs from the rendering by exactly 0.1 on every
        // supported pixel, whatever the tool's image size.
        Image obs = out.image.pixels;
        for (int y = 0; y < k.height; ++y)
            for (int x = 0; x < k.width; ++x)
                if (out.alpha(x, y) > cfg.support_threshold)
                    for (int c = 0; c < 3; ++c) obs(x, y, c) += obs(x, y, c) > 0.5 ? -0.1 : 0.1;
        const SupportLoss sl = support_loss(out.image.pixels, out.alpha, obs, cfg);
        avg[i] = pixel_averaged_loss(out, obs, cfg);
        total[i] = sl.total();
        ++i;
    }
    CHECK(avg[0] == doctest::Approx(0.01).epsilon(1e-9));
    CHECK(avg[1] == doctest::Approx(0.01).epsilon(1e-9));
    CHECK(total[0] > 1.5 * total[1]);
}

TEST_CASE("loss config validation") {
    LossConfig cfg;
    cfg.ssim_window = 4;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.alpha_blend = 1.5;
    CHECK_THROWS_AS(cfg.validate(), Error);
}
