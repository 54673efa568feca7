#include "toolpose/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "toolpose/errors.hpp"

namespace toolpose {

void RefinerConfig::validate() const {
    if (!(lr_rot > 0.0) || !(lr_trans > 0.0) || !(lr_joint > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "learning rates must be positive");
    }
    if (!(scheduler_factor > 0.0 && scheduler_factor < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "scheduler_factor must lie in (0, 1)");
    }
    if (scheduler_patience < 1 || early_stop_window < 1) {
        throw Error(ErrorCode::InvalidArgument, "scheduler_patience and early_stop_window must be >= 1");
    }
    if (!(trans_clamp > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "trans_clamp must be positive");
    }
    if (!(early_stop_delta >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "early_stop_delta must be non-negative");
    }
    if (max_iters_first_frame < 1 || max_iters_tracking < 1) {
        throw Error(ErrorCode::InvalidArgument, "iteration caps must be >= 1");
    }
}

void CoarseConfig::validate() const {
    if (grid_size < 1 || n_rotations < 1) {
        throw Error(ErrorCode::InvalidArgument, "grid_size and n_rotations must be >= 1");
    }
    if (!(init_depth > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "init_depth must be positive");
    }
    if (!(grid_extent >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "grid_extent must be non-negative");
    }
    if (refine_iters_per_candidate < 1) {
        throw Error(ErrorCode::InvalidArgument, "refine_iters_per_candidate must be >= 1");
    }
    if (search_resolution < 0) {
        throw Error(ErrorCode::InvalidArgument, "search_resolution must be >= 0");
    }
}

bool PlateauScheduler::observe(double loss) {
    if (loss < best_) {
        best_ = loss;
        stale_ = 0;
        return false;
    }
    if (++stale_ >= patience_) {
        stale_ = 0;
        ++reductions_;
        return true;
    }
    return false;
}

bool EarlyStopper::observe(double loss) {
    history_.push_back(loss);
    if (static_cast<int>(history_.size()) > window_ + 1) {
        history_.pop_front();
    }
    return static_cast<int>(history_.size()) == window_ + 1 && std::abs(history_.back() - history_.front()) < delta_;
}

FrameEstimate apply_update(const FrameEstimate& current, const PoseGradient& grad, const LearningRates& lr,
                           double trans_clamp, const JointLimits& limits) {
    FrameEstimate next = current;
    next.pose.rotation = apply_rotation_update(current.pose.rotation, -grad.omega, lr.rot);
    next.pose.translation =
        current.pose.translation - lr.trans * clamp_vector(grad.translation, -trans_clamp, trans_clamp);
    next.q = clamp_joints(current.q - lr.joint * grad.joints, limits);
    return next;
}

namespace {

bool finite(const PoseGradient& g) {
    return g.omega.allFinite() && g.translation.allFinite() && g.joints.allFinite();
}

}  // namespace

FrameEstimate refine(const Pose& pose, const JointVector& q, const Image& target, const ToolModel& model,
                     const Intrinsics& k, const RefinerConfig& cfg, const LossConfig& loss_cfg, int max_iters,
                     const RefineOptions& options) {
    cfg.validate();
    loss_cfg.validate();
    if (max_iters < 1) {
        throw Error(ErrorCode::InvalidArgument, "max_iters must be >= 1");
    }
    if (!model.limits.contains(q)) {
        throw Error(ErrorCode::JointOutOfRange, "initial joints outside limits");
    }

    LearningRates lr = options.start_rates.value_or(LearningRates{cfg.lr_rot, cfg.lr_trans, cfg.lr_joint});
    PlateauScheduler scheduler(cfg.scheduler_factor, cfg.scheduler_patience);
    EarlyStopper stopper(cfg.early_stop_delta, cfg.early_stop_window);

    FrameEstimate current;
    current.pose = pose;
    current.q = clamp_joints(q, model.limits);
    FrameEstimate best = current;
    best.final_loss = std::numeric_limits<double>::infinity();
    int used = 0;
    bool stopped = false;

    for (int it = 0; it < max_iters; ++it) {
        const std::vector<PosedGaussian> gaussians = pose_gaussians(model, current.pose, current.q);
        const RenderOutput out = render(gaussians, k, options.render);
        const LossGradient lg = combined_loss_gradient(out.image.pixels, target, loss_cfg);
        if (!std::isfinite(lg.loss)) {
            std::ostringstream os;
            os << "loss became " << lg.loss << " at iteration " << it;
            throw Error(ErrorCode::NonFiniteLoss, os.str());
        }
        used = it + 1;
        if (lg.loss < best.final_loss) {
            best.pose = current.pose;
            best.q = current.q;
            best.final_loss = lg.loss;
        }
        RefineStep step;
        step.loss = lg.loss;
        step.pose = current.pose;
        step.q = current.q;
        step.lr = lr;

        if (stopper.observe(lg.loss)) {
            stopped = true;
            if (options.trace) options.trace->steps.push_back(step);
            break;
        }
        if (it + 1 == max_iters) {
            if (options.trace) options.trace->steps.push_back(step);
            break;
        }
        const PoseGradient grad =
            render_backward(out, lg.gradient, gaussians, jacobian_gaussians(model, current.pose, current.q));
        if (!finite(grad)) {
            std::ostringstream os;
            os << "gradient became non-finite at iteration " << it;
            throw Error(ErrorCode::NonFiniteLoss, os.str());
        }
        if (scheduler.observe(lg.loss)) {
            lr.rot *= cfg.scheduler_factor;
            lr.trans *= cfg.scheduler_factor;
            lr.joint *= cfg.scheduler_factor;
        }
        step.gradient = grad;
        step.lr = lr;
        if (options.trace) options.trace->steps.push_back(step);
        current = apply_update(current, grad, lr, cfg.trans_clamp, model.limits);
    }
    best.iters_used = used;
    best.stopped_early = stopped;
    if (options.end_rates) *options.end_rates = lr;
    return best;
}

Vec2 mask_centroid(const Mask& mask) {
    double sx = 0.0, sy = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask(x, y)) {
                sx += x;
                sy += y;
                ++n;
            }
        }
    }
    if (n == 0) {
        throw Error(ErrorCode::EmptyMask, "mask has no true pixels");
    }
    return {sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

Pose candidate_pose(const Vec3& point, double angle, const Rotation& base_rotation, const Vec3& anchor) {
    const Rotation r = Rotation::about_z(angle) * base_rotation;
    return {r, point - r * anchor};
}

std::vector<Pose> generate_candidates(const Mask& mask, const Intrinsics& k, const CoarseConfig& cfg,
                                      const Vec3& anchor) {
    cfg.validate();
    const Vec2 center = mask_centroid(mask);
    int x0 = mask.width(), x1 = -1, y0 = mask.height(), y1 = -1;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask(x, y)) {
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
            }
        }
    }
    const double diag_px = std::hypot(x1 - x0 + 1.0, y1 - y0 + 1.0);
    const double spacing_px = cfg.grid_extent * diag_px;
    const double half = (cfg.grid_size - 1) / 2.0;

    std::vector<Pose> out;
    out.reserve(static_cast<std::size_t>(cfg.grid_size * cfg.grid_size * cfg.n_rotations));
    for (int row = 0; row < cfg.grid_size; ++row) {
        for (int col = 0; col < cfg.grid_size; ++col) {
            const Vec2 px = center + spacing_px * Vec2(col - half, row - half);
            const Vec3 point = back_project(px, cfg.init_depth, k);
            for (int r = 0; r < cfg.n_rotations; ++r) {
                const double angle = 2.0 * std::numbers::pi * r / cfg.n_rotations;
                out.push_back(candidate_pose(point, angle, cfg.base_rotation, anchor));
            }
        }
    }
    return out;
}

int coarse_search_factor(int width, int height, int search_resolution) {
    if (search_resolution <= 0) return 1;
    const int longest = std::max(width, height);
    return std::max(1, (longest + search_resolution - 1) / search_resolution);
}

double candidate_score(const FrameEstimate& refined, const Image& image, const ToolModel& model, const Intrinsics& k,
                       const LossConfig& loss_cfg, const RenderSettings& render_settings, bool reject_off_view) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    // Descent can push a poor hypothesis out of view until only faint Gaussian
    // tails remain inside the image; their tiny residual would otherwise win.
    if (reject_off_view) {
        const Vec3 anchor = refined.pose * model_centroid(model, refined.q);
        if (!(anchor.z() > render_settings.z_min)) return inf;
        const Vec2 px = project(anchor, k, render_settings.z_min);
        if (!(px.x() >= -0.5 && px.y() >= -0.5 && px.x() <= k.width - 0.5 && px.y() <= k.height - 0.5)) return inf;
    }
    const auto gaussians = pose_gaussians(model, refined.pose, refined.q);
    const double pl = pixel_averaged_loss(render(gaussians, k, render_settings), image, loss_cfg);
    return std::isfinite(pl) ? pl : inf;
}

CoarseResult coarse_search(const Image& first_frame, const Mask& mask, const ToolModel& model, const Intrinsics& k,
                           const CoarseConfig& coarse_cfg, const RefinerConfig& refiner_cfg,
                           const LossConfig& loss_cfg, const RenderSettings& render_settings) {
    coarse_cfg.validate();
    if (mask.width() != first_frame.width() || mask.height() != first_frame.height() ||
        k.width != first_frame.width() || k.height != first_frame.height()) {
        throw Error(ErrorCode::DimensionMismatch, "frame, mask and intrinsics must share one size");
    }
    if (mask.count() == 0) {
        throw Error(ErrorCode::EmptyMask, "mask has no true pixels");
    }
    CoarseResult res;
    res.search_factor = coarse_search_factor(first_frame.width(), first_frame.height(), coarse_cfg.search_resolution);
    res.search_image = downsample(first_frame, res.search_factor);
    res.search_intrinsics = downscaled(k, res.search_factor);
    Mask search_mask = downsample(mask, res.search_factor);

    const JointVector q0 = clamp_joints(JointVector::Zero(), model.limits);
    if (search_mask.count() > 0) {
        res.candidates = generate_candidates(search_mask, res.search_intrinsics, coarse_cfg, model_centroid(model, q0));
    } else {
        // The mask vanished at the search scale; place the grid from the full-size mask instead.
        res.candidates = generate_candidates(mask, k, coarse_cfg, model_centroid(model, q0));
    }
    const std::size_t n = res.candidates.size();
    res.refined.resize(n);
    res.pixel_losses.assign(n, std::numeric_limits<double>::infinity());
    std::vector<std::string> failures(n);

    RefineOptions opts;
    opts.render = render_settings;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        const auto idx = static_cast<std::size_t>(i);
        try {
            const FrameEstimate est = refine(res.candidates[idx], q0, res.search_image, model, res.search_intrinsics,
                                             refiner_cfg, loss_cfg, coarse_cfg.refine_iters_per_candidate, opts);
            res.refined[idx] = est;
            res.pixel_losses[idx] =
                candidate_score(est, res.search_image, model, res.search_intrinsics, loss_cfg, render_settings,
                                coarse_cfg.reject_off_view);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::NonFiniteLoss) {
                res.refined[idx].pose = res.candidates[idx];
                res.refined[idx].q = q0;
                res.refined[idx].final_loss = std::numeric_limits<double>::infinity();
            } else {
                failures[idx] = e.what();
            }
        } catch (const std::exception& e) {
            failures[idx] = e.what();
        }
    }
    for (const std::string& f : failures) {
        if (!f.empty()) throw Error(ErrorCode::RenderFailure, f);
    }

    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::isfinite(res.pixel_losses[i]) && (best == n || res.pixel_losses[i] < res.pixel_losses[best])) {
            best = i;
        }
    }
    if (best == n) {
        throw Error(ErrorCode::AllCandidatesDiverged, "no candidate produced a finite pixel-averaged loss");
    }
    res.selected = best;
    res.estimate = res.refined[best];
    return res;
}

FrameEstimate coarse_estimate(const Image& first_frame, const Mask& mask, const ToolModel& model,
                              const Intrinsics& k, const CoarseConfig& coarse_cfg, const RefinerConfig& refiner_cfg,
                              const LossConfig& loss_cfg, const RenderSettings& render_settings) {
    return coarse_search(first_frame, mask, model, k, coarse_cfg, refiner_cfg, loss_cfg, render_settings).estimate;
}

TrackedFrame Tracker::update(int frame_index, const Frame& frame, const std::optional<FrameEstimate>& initial) {
    if (previous_ && frame_index <= previous_->frame_index) {
        throw Error(ErrorCode::InvalidArgument, "frame indices must strictly increase");
    }
    TrackedFrame tf;
    tf.frame_index = frame_index;
    try {
        RefineOptions opts;
        opts.render = cfg_.render;
        LearningRates end_rates;
        opts.end_rates = &end_rates;
        if (!cfg_.refiner.reset_lr_per_frame && rates_) {
            opts.start_rates = rates_;
        }
        if (!previous_) {
            FrameEstimate start;
            if (initial) {
                start = *initial;
            } else {
                if (!frame.mask) {
                    throw Error(ErrorCode::EmptyMask, "first frame needs a mask for the coarse search");
                }
                start = coarse_estimate(frame.pixels, *frame.mask, model_, k_, cfg_.coarse, cfg_.refiner, cfg_.loss,
                                        cfg_.render);
            }
            tf.estimate = refine(start.pose, start.q, frame.pixels, model_, k_, cfg_.refiner, cfg_.loss,
                                 cfg_.refiner.max_iters_first_frame, opts);
        } else {
            const FrameEstimate& prev = previous_->estimate;
            tf.estimate = refine(prev.pose, prev.q, frame.pixels, model_, k_, cfg_.refiner, cfg_.loss,
                                 cfg_.refiner.max_iters_tracking, opts);
        }
        rates_ = end_rates;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::NonFiniteLoss && previous_) {
            tf.estimate = previous_->estimate;
            tf.estimate.iters_used = 0;
            tf.failed = true;
            tf.error = e.what();
        } else {
            std::ostringstream os;
            os << "frame " << frame_index << ": " << e.what();
            throw Error(e.code(), os.str());
        }
    }
    previous_ = tf;
    return tf;
}

std::vector<TrackedFrame> track_sequence(std::span<const Frame> frames, const ToolModel& model,
                                         const Intrinsics& k, const TrackingConfig& cfg,
                                         const std::optional<FrameEstimate>& initial) {
    if (frames.empty()) {
        throw Error(ErrorCode::EmptyInput, "track_sequence needs at least one frame");
    }
    Tracker tracker(model, k, cfg);
    std::vector<TrackedFrame> out;
    out.reserve(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        out.push_back(tracker.update(static_cast<int>(i), frames[i], i == 0 ? initial : std::nullopt));
    }
    return out;
}

Trajectory to_trajectory(std::span<const TrackedFrame> frames) {
    Trajectory traj;
    for (const TrackedFrame& f : frames) {
        TrajectoryRecord r;
        r.frame = f.frame_index;
        r.pose = f.estimate.pose;
        r.q = f.estimate.q;
        if (!f.failed) r.loss = f.estimate.final_loss;
        traj.records.push_back(r);
    }
    return traj;
}

}  // namespace toolpose
