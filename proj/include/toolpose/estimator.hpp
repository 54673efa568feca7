#pragma once

#include <cstddef>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "toolpose/image.hpp"
#include "toolpose/loss.hpp"
#include "toolpose/renderer.hpp"
#include "toolpose/tool_model.hpp"
#include "toolpose/trajectory.hpp"

namespace toolpose {

struct RefinerConfig {
    double lr_rot = 0.02;         // alpha in R <- R (I + alpha [w]x)
    double lr_trans = 0.0035;     // beta in t <- t - beta clamp(grad_t, -delta, delta)
    double trans_clamp = 0.02;    // delta
    double lr_joint = 0.1;       // gamma in q <- q - gamma grad_q
    double scheduler_factor = 0.5;
    int scheduler_patience = 20;
    double early_stop_delta = 1e-7;
    int early_stop_window = 10;
    int max_iters_first_frame = 300;
    int max_iters_tracking = 10;
    /// Restore the base learning rates at every new frame while tracking.
    bool reset_lr_per_frame = true;

    void validate() const;
};

struct CoarseConfig {
    int grid_size = 3;            // grid_size x grid_size points
    double grid_extent = 0.5;     // grid spacing as a fraction of the mask bbox diagonal
    int n_rotations = 36;
    double init_depth = 0.10;     // meters
    int refine_iters_per_candidate = 50;
    /// The search runs on the frame box-downsampled by the smallest integer
    /// factor that brings both sides to at most this many pixels (0: full size).
    int search_resolution = 64;
    /// Score candidates whose refined tool centroid left the image as +inf.
    bool reject_off_view = false;
    /// Orientation of every candidate before its in-plane rotation.
    Rotation base_rotation = canonical_view_rotation();

    void validate() const;
};

struct FrameEstimate {
    Pose pose;
    JointVector q = JointVector::Zero();
    double final_loss = 0.0;
    int iters_used = 0;
    bool stopped_early = false;
};

/// Halves (by `factor`) the learning rates once the best loss has not improved
/// for `patience` consecutive observations.
class PlateauScheduler {
  public:
    PlateauScheduler(double factor, int patience) : factor_(factor), patience_(patience) {}

    /// Returns true when this observation triggers a reduction.
    bool observe(double loss);
    double factor() const { return factor_; }
    int reductions() const { return reductions_; }
    int stale_count() const { return stale_; }

  private:
    double factor_;
    int patience_;
    double best_ = std::numeric_limits<double>::infinity();
    int stale_ = 0;
    int reductions_ = 0;
};

/// Fires when |loss(t) - loss(t - window)| < delta.
class EarlyStopper {
  public:
    EarlyStopper(double delta, int window) : delta_(delta), window_(window) {}

    bool observe(double loss);

  private:
    double delta_;
    int window_;
    std::deque<double> history_;
};

struct LearningRates {
    double rot = 0.0;
    double trans = 0.0;
    double joint = 0.0;
};

/// One descent step: rotation R (I + lr_rot [-g_w]x) re-orthonormalized,
/// translation t - lr_trans clamp(g_t, -delta, delta), joints clamped into limits.
FrameEstimate apply_update(const FrameEstimate& current, const PoseGradient& grad, const LearningRates& lr,
                           double trans_clamp, const JointLimits& limits);

struct RefineStep {
    double loss = 0.0;
    LearningRates lr;
    PoseGradient gradient;
    Pose pose;  // iterate the loss was evaluated at
    JointVector q = JointVector::Zero();
};

/// Optional per-iteration record of a refine() call.
struct RefineTrace {
    std::vector<RefineStep> steps;
};

struct RefineOptions {
    RenderSettings render;
    /// Learning rates to start from instead of the configured base rates.
    std::optional<LearningRates> start_rates;
    /// Receives the learning rates in effect when refine() returned.
    LearningRates* end_rates = nullptr;
    RefineTrace* trace = nullptr;
};

/// Gradient descent on the combined loss from (pose, q) for at most max_iters
/// loss evaluations. Returns the best iterate seen. Throws JointOutOfRange for
/// an infeasible start and NonFiniteLoss when the loss or its gradient stops
/// being finite.
FrameEstimate refine(const Pose& pose, const JointVector& q, const Image& target, const ToolModel& model,
                     const Intrinsics& k, const RefinerConfig& cfg, const LossConfig& loss_cfg, int max_iters,
                     const RefineOptions& options = {});

/// Mean (x, y) pixel coordinate of the true pixels; throws EmptyMask.
Vec2 mask_centroid(const Mask& mask);

/// grid_size^2 * n_rotations hypotheses. The grid lies in the plane z = init_depth
/// centered on the back-projected mask centroid; `anchor` (a point of the tool
/// in its base frame) is what lands on each grid point. Candidate index is
/// (row * grid_size + col) * n_rotations + rotation_bin.
std::vector<Pose> generate_candidates(const Mask& mask, const Intrinsics& k, const CoarseConfig& cfg,
                                      const Vec3& anchor = Vec3::Zero());

/// Pose of a single hypothesis: anchor at `point`, rotated in-plane by `angle`.
Pose candidate_pose(const Vec3& point, double angle, const Rotation& base_rotation, const Vec3& anchor);

struct CoarseResult {
    FrameEstimate estimate;
    std::size_t selected = 0;
    std::vector<Pose> candidates;
    std::vector<FrameEstimate> refined;
    /// candidate_score of each refined candidate on the search image; +inf for
    /// candidates that failed.
    std::vector<double> pixel_losses;
    int search_factor = 1;
    Image search_image;
    Intrinsics search_intrinsics;
};

/// Downsampling factor coarse_search() uses for a width x height frame.
int coarse_search_factor(int width, int height, int search_resolution);

/// Refines every candidate for refine_iters_per_candidate iterations on the
/// (possibly downsampled) frame and keeps the lowest candidate_score, ties going
/// to the lower index. The returned estimate is in the full-size frame's camera.
CoarseResult coarse_search(const Image& first_frame, const Mask& mask, const ToolModel& model, const Intrinsics& k,
                           const CoarseConfig& coarse_cfg, const RefinerConfig& refiner_cfg,
                           const LossConfig& loss_cfg, const RenderSettings& render_settings = {});

/// Pixel-averaged loss used to rank a refined candidate. With reject_off_view
/// it is +inf when the tool centroid projects outside the image or behind the camera.
double candidate_score(const FrameEstimate& refined, const Image& image, const ToolModel& model, const Intrinsics& k,
                       const LossConfig& loss_cfg, const RenderSettings& render_settings,
                       bool reject_off_view = false);

/// Selected hypothesis of coarse_search(); throws EmptyMask or AllCandidatesDiverged.
FrameEstimate coarse_estimate(const Image& first_frame, const Mask& mask, const ToolModel& model,
                              const Intrinsics& k, const CoarseConfig& coarse_cfg, const RefinerConfig& refiner_cfg,
                              const LossConfig& loss_cfg, const RenderSettings& render_settings = {});

struct TrackingConfig {
    CoarseConfig coarse;
    RefinerConfig refiner;
    LossConfig loss;
    RenderSettings render;
};

struct TrackedFrame {
    int frame_index = 0;
    FrameEstimate estimate;
    bool failed = false;  // estimate carried over from the previous frame
    std::string error;
};

/// Frame-to-frame state: each frame warm-starts from the previous estimate.
class Tracker {
  public:
    Tracker(const ToolModel& model, const Intrinsics& k, const TrackingConfig& cfg)
        : model_(model), k_(k), cfg_(cfg) {}

    /// First call runs the coarse search (unless `initial` is given) and a full
    /// refine; later calls refine for at most max_iters_tracking iterations.
    /// frame_index must strictly increase.
    TrackedFrame update(int frame_index, const Frame& frame, const std::optional<FrameEstimate>& initial = {});

    const std::optional<TrackedFrame>& previous() const { return previous_; }

  private:
    const ToolModel& model_;
    Intrinsics k_;
    TrackingConfig cfg_;
    std::optional<TrackedFrame> previous_;
    std::optional<LearningRates> rates_;
};

std::vector<TrackedFrame> track_sequence(std::span<const Frame> frames, const ToolModel& model,
                                         const Intrinsics& k, const TrackingConfig& cfg,
                                         const std::optional<FrameEstimate>& initial = {});

/// Trajectory view of tracked frames; failed frames carry no loss.
Trajectory to_trajectory(std::span<const TrackedFrame> frames);

}  // namespace toolpose
