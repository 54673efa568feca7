#include "toolpose/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "toolpose/loss.hpp"
#include "toolpose/renderer.hpp"
#include "toolpose/tool_model.hpp"

namespace toolpose {

double gradcheck_error(double analytic, double numeric, double floor) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

const char* gradcheck_component_name(int i) {
    static const char* names[9] = {"omega_x", "omega_y", "omega_z", "t_x", "t_y", "t_z", "q1", "q2", "q3"};
    return names[i];
}

namespace {

struct Scene {
    ToolModel model;
    Pose pose;
    JointVector q;
    Image target;
};

using Vec9 = Eigen::Matrix<double, 9, 1>;

void perturbed(const Scene& s, const Vec9& d, Pose& pose, JointVector& q) {
    pose.rotation = s.pose.rotation * Rotation::exp(d.head<3>());
    pose.translation = s.pose.translation + d.segment<3>(3);
    q = s.q + d.tail<3>();
}

Scene random_scene(std::mt19937_64& rng, const Intrinsics& k, const RenderSettings& settings) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
    auto small_rot = [&](double mag) { return Rotation::exp(Vec3(uni(-mag, mag), uni(-mag, mag), uni(-mag, mag))); };

    Scene s;
    s.model = default_tool_model();
    for (GaussianPrimitive& g : s.model.gaussians) {
        g.color = Vec3(uni(0.05, 0.95), uni(0.05, 0.95), uni(0.05, 0.95));
        g.opacity = uni(0.3, 0.95);
        g.scale = g.scale.cwiseProduct(Vec3(uni(0.7, 1.4), uni(0.7, 1.4), uni(0.7, 1.4)));
    }
    const JointLimits& lim = s.model.limits;
    do {
        for (int i = 0; i < 3; ++i) s.q[i] = uni(lim.lower[i] + 0.05, lim.upper[i] - 0.05);
    } while (!jaws_feasible(s.q));

    const Rotation r = Rotation::about_z(uni(-std::numbers::pi, std::numbers::pi)) * canonical_view_rotation() *
                       small_rot(0.4);
    const Vec3 center(uni(-0.004, 0.004), uni(-0.004, 0.004), uni(0.09, 0.12));
    s.pose = Pose{r, center - r * model_centroid(s.model, s.q)};

    // Target from a nearby state so the residual is structured, plus a little noise.
    const Pose tp{s.pose.rotation * small_rot(0.06),
                  s.pose.translation + Vec3(uni(-0.002, 0.002), uni(-0.002, 0.002), uni(-0.003, 0.003))};
    const JointVector tq = clamp_joints(s.q + Vec3(uni(-0.1, 0.1), uni(-0.1, 0.1), uni(-0.1, 0.1)), lim);
    s.target = render(pose_gaussians(s.model, tp, tq), k, settings).image.pixels;
    std::normal_distribution<double> n(0.0, 0.01);
    for (double& v : s.target.data()) v = std::clamp(v + n(rng), 0.0, 1.0);
    return s;
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    const Intrinsics k = Intrinsics::create(cfg.resolution * 100.0 / 64.0, cfg.resolution * 100.0 / 64.0,
                                            (cfg.resolution - 1) / 2.0, (cfg.resolution - 1) / 2.0, cfg.resolution,
                                            cfg.resolution);
    RenderSettings settings;
    settings.alpha_cutoff = 0.0;
    const LossConfig loss_cfg;
    std::mt19937_64 rng(cfg.seed);

    GradcheckReport report;
    const double h = cfg.step;
    while (static_cast<int>(report.instances.size()) < cfg.trials) {
        const Scene s = random_scene(rng, k, settings);
        const std::vector<PosedGaussian> posed = pose_gaussians(s.model, s.pose, s.q);
        const RenderOutput out = render(posed, k, settings);
        const LossGradient lg = combined_loss_gradient(out.image.pixels, s.target, loss_cfg);
        const PoseGradient pg =
            render_backward(out, lg.gradient, posed, jacobian_gaussians(s.model, s.pose, s.q));
        Vec9 analytic;
        analytic << pg.omega, pg.translation, pg.joints;

        GradcheckInstance inst;
        inst.loss = lg.loss;
        bool order_changed = false;
        for (int i = 0; i < 9 && !order_changed; ++i) {
            double f[4];
            const double offsets[4] = {-2.0 * h, -h, h, 2.0 * h};
            for (int j = 0; j < 4; ++j) {
                Vec9 d = Vec9::Zero();
                d[i] = offsets[j];
                Pose p;
                JointVector q;
                perturbed(s, d, p, q);
                const RenderOutput o = render(pose_gaussians(s.model, p, q), k, settings);
                if (o.cache.order != out.cache.order) {
                    order_changed = true;
                    break;
                }
                f[j] = combined_loss(o.image.pixels, s.target, loss_cfg);
            }
            if (order_changed) break;
            GradcheckComponent& c = inst.components[static_cast<std::size_t>(i)];
            c.analytic = analytic[i];
            c.numeric = (f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * h);
            c.error = gradcheck_error(c.analytic, c.numeric, cfg.abs_floor);
            if (!(c.error <= cfg.rel_tol)) inst.pass = false;
        }
        if (order_changed) {
            ++report.resampled;
            continue;
        }
        for (const GradcheckComponent& c : inst.components) report.max_error = std::max(report.max_error, c.error);
        if (!inst.pass) ++report.failures;
        report.instances.push_back(inst);
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace toolpose
