#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "toolpose/geometry.hpp"
#include "toolpose/image.hpp"
#include "toolpose/loss.hpp"
#include "toolpose/renderer.hpp"
#include "toolpose/tool_model.hpp"
#include "toolpose/trajectory.hpp"

namespace toolpose {

/// Pinhole camera for a square-pixel sensor with the principal point at the
/// image center.
struct CameraSpec {
    int width = 128;
    int height = 128;
    double focal = 200.0;  // pixels

    Intrinsics intrinsics() const;
};

struct DatasetSpec {
    int n_canonical = 500;
    int n_posed = 10000;
    int views_per_config = 12;
    double azimuth_min = 0.0;
    double azimuth_max = 6.283185307179586;
    double elevation_min = -1.0471975511965976;  // -60 deg
    double elevation_max = 1.0471975511965976;
    double distance_min = 0.08;
    double distance_max = 0.14;
    double noise_std = 0.0;
    std::uint64_t seed = 0;
    CameraSpec camera;

    /// Throws InvalidSpec.
    void validate() const;
};

struct SequenceSpec {
    int n_frames = 30;
    double max_translation = 0.002;    // m per frame
    double max_rotation = 0.0349066;   // rad per frame (2 deg)
    double max_joint_velocity = 0.02;  // rad per frame
    double smoothing = 0.8;            // weight of the previous velocity
    double noise_std = 0.0;
    double distance = 0.10;            // initial depth of the tool centroid
    std::uint64_t seed = 0;
    CameraSpec camera;

    void validate() const;
};

/// One manifest line.
struct GroundTruthRecord {
    int index = 0;
    int config = 0;  // configuration the view belongs to (dataset) or frame (sequence)
    Pose pose;       // camera-from-tool
    JointVector q = JointVector::Zero();
    Intrinsics camera;
    std::string image;  // relative to the manifest directory
    std::string mask;
    double noise_std = 0.0;
    /// Largest |stored - rendered| a pixel may show: truncated noise plus
    /// 8-bit quantization.
    double noise_bound = 0.0;

    bool operator==(const GroundTruthRecord&) const = default;
};

struct DatasetManifest {
    std::filesystem::path path;  // manifest.jsonl
    std::vector<GroundTruthRecord> records;
};

std::string record_to_line(const GroundTruthRecord& r);
/// Throws ParseError naming the line.
GroundTruthRecord record_from_line(const std::string& line, const std::string& where);

void save_manifest(const std::filesystem::path& path, const std::vector<GroundTruthRecord>& records);
DatasetManifest load_manifest(const std::filesystem::path& path);
/// Loads the record's image and mask; paths resolve against the manifest's directory.
Frame load_record_frame(const DatasetManifest& manifest, const GroundTruthRecord& record);

/// Camera looking at `target` (tool frame) from the given spherical direction.
/// The shaft axis projects onto the image x axis. Returns camera-from-tool.
Pose look_at_pose(const Vec3& target, double azimuth, double elevation, double distance);

/// Uniform joint sample inside the limits with q2 + q3 >= 0.
JointVector sample_joints(const JointLimits& limits, std::mt19937_64& rng);

/// Gaussian noise truncated at 4 sigma, added then clipped to [0, 1].
void add_pixel_noise(Image& image, double sigma, std::mt19937_64& rng);
double declared_noise_bound(double sigma);

/// Renders every configuration from views_per_config cameras into
/// out_dir/{images,masks} and writes out_dir/manifest.jsonl. Canonical
/// configurations use q = 0; posed ones sample joints. Throws InvalidSpec or IoError.
DatasetManifest generate_dataset(const ToolModel& model, const DatasetSpec& spec, const std::filesystem::path& out_dir,
                                 const RenderSettings& settings = {});

struct SequenceResult {
    std::vector<Frame> frames;  // as stored on disk (noisy, 8-bit)
    Trajectory ground_truth;
    DatasetManifest manifest;
};

/// Smooth bounded random walk of pose and joints. Writes frames, masks,
/// ground_truth.csv and manifest.jsonl into out_dir.
SequenceResult generate_sequence(const ToolModel& model, const SequenceSpec& spec,
                                 const std::filesystem::path& out_dir, const RenderSettings& settings = {});

/// Pose and joint trajectory of generate_sequence without rendering anything.
Trajectory sample_sequence_motion(const ToolModel& model, const SequenceSpec& spec);

DatasetSpec parse_dataset_spec(const std::string& text, const std::string& source = "<string>");
SequenceSpec parse_sequence_spec(const std::string& text, const std::string& source = "<string>");
DatasetSpec load_dataset_spec(const std::filesystem::path& path);
SequenceSpec load_sequence_spec(const std::filesystem::path& path);

struct FitView {
    Image image;
    Pose camera;  // camera-from-tool
    Intrinsics intrinsics;
};

struct FitConfig {
    int iters = 200;
    double lr_mean = 5e-5;  // Adam step sizes
    double lr_scale = 2e-5;
    double lr_opacity = 0.01;
    double lr_color = 0.01;
    double min_scale = 5e-5;
    double max_scale = 0.01;
    LossConfig loss;
    RenderSettings render;
};

struct FitResult {
    ToolModel model;
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

/// Adam on Gaussian means, scales, opacities and colors at q = 0, minimizing the
/// mean combined loss over views. Scales, opacities and colors are projected
/// back into range after each step. Throws InsufficientViews for fewer than 2 views.
FitResult fit_canonical_model(const ToolModel& init, const std::vector<FitView>& views, const FitConfig& cfg);

/// Mean combined loss of the model (q = 0) over the views.
double mean_view_loss(const ToolModel& model, const std::vector<FitView>& views, const LossConfig& loss,
                      const RenderSettings& render = {});

}  // namespace toolpose
