#include "toolpose/synthlab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace toolpose {

using namespace detail;
using ojson = nlohmann::ordered_json;

Intrinsics CameraSpec::intrinsics() const {
    return Intrinsics::create(focal, focal, (width - 1) / 2.0, (height - 1) / 2.0, width, height);
}

namespace {

void check_camera(const CameraSpec& c) {
    if (c.width < 1 || c.height < 1) bad("camera", "resolution must be at least 1x1");
    if (!(c.focal > 0.0)) bad("camera.focal", "must be positive");
}

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

Vec3 sample_ball(double radius, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vec3 d(n(rng), n(rng), n(rng));
    const double len = d.norm();
    if (len == 0.0 || radius == 0.0) return Vec3::Zero();
    return d / len * radius * std::cbrt(u(rng));
}

Vec3 clip_norm(const Vec3& v, double bound) {
    const double n = v.norm();
    return n > bound ? Vec3(v * (bound / n)) : v;
}

std::string numbered(const char* dir, int index, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s/%06d.%s", dir, index, ext);
    return buf;
}

void make_dirs(const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "images", ec);
    if (!ec) std::filesystem::create_directories(out_dir / "masks", ec);
    if (ec) {
        throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());
    }
}

Mask support_mask(const Image& alpha, double threshold) {
    Mask m(alpha.width(), alpha.height());
    for (int y = 0; y < alpha.height(); ++y) {
        for (int x = 0; x < alpha.width(); ++x) m.set(x, y, alpha(x, y) > threshold);
    }
    return m;
}

Image quantized(const Image& img) {
    Image out = img;
    for (double& v : out.data()) v = quantize_unit(v);
    return out;
}

// Renders, perturbs and stores one record; returns the stored image.
Image emit_record(const ToolModel& model, const GroundTruthRecord& rec, const std::filesystem::path& out_dir,
                  const RenderSettings& settings, std::mt19937_64& noise_rng) {
    const RenderOutput out = render(pose_gaussians(model, rec.pose, rec.q), rec.camera, settings);
    Image pixels = out.image.pixels;
    add_pixel_noise(pixels, rec.noise_std, noise_rng);
    pixels = quantized(pixels);
    write_png(out_dir / rec.image, pixels);
    write_pgm(out_dir / rec.mask, support_mask(out.alpha, LossConfig{}.support_threshold));
    return pixels;
}

}  // namespace

void DatasetSpec::validate() const {
    if (n_canonical < 0 || n_posed < 0 || n_canonical + n_posed < 1) {
        bad("n_canonical", "configuration counts must be non-negative with at least one configuration");
    }
    if (views_per_config < 1) bad("views_per_config", "must be >= 1");
    if (!(distance_min > 0.0) || !(distance_max >= distance_min)) bad("distance_min", "need 0 < distance_min <= distance_max");
    if (!(azimuth_max >= azimuth_min)) bad("azimuth_min", "must not exceed azimuth_max");
    if (!(elevation_max >= elevation_min) || elevation_min < -1.4 || elevation_max > 1.4) {
        bad("elevation_min", "elevation range must be ordered and within +-80 deg");
    }
    if (!(noise_std >= 0.0 && noise_std <= 1.0)) bad("noise_std", "must lie in [0, 1]");
    check_camera(camera);
}

void SequenceSpec::validate() const {
    if (n_frames < 1) bad("n_frames", "must be >= 1");
    if (!(max_translation >= 0.0)) bad("max_translation", "must be >= 0");
    if (!(max_rotation >= 0.0 && max_rotation < 3.14159)) bad("max_rotation", "must lie in [0, pi)");
    if (!(max_joint_velocity >= 0.0)) bad("max_joint_velocity", "must be >= 0");
    if (!(smoothing >= 0.0 && smoothing < 1.0)) bad("smoothing", "must lie in [0, 1)");
    if (!(noise_std >= 0.0 && noise_std <= 1.0)) bad("noise_std", "must lie in [0, 1]");
    if (!(distance > 0.0)) bad("distance", "must be positive");
    check_camera(camera);
}

Pose look_at_pose(const Vec3& target, double azimuth, double elevation, double distance) {
    const Vec3 dir(std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth),
                   std::sin(elevation));
    const Vec3 eye = target + distance * dir;
    const Vec3 z = -dir;
    const Vec3 up = Vec3::UnitZ();
    Vec3 x = up - up.dot(z) * z;
    if (x.norm() < 1e-9) x = Vec3::UnitX() - Vec3::UnitX().dot(z) * z;
    x.normalize();
    const Vec3 y = z.cross(x);
    Mat3 r;
    r.row(0) = x.transpose();
    r.row(1) = y.transpose();
    r.row(2) = z.transpose();
    const Rotation rot = Rotation::nearest(r);
    return {rot, -(rot * eye)};
}

JointVector sample_joints(const JointLimits& limits, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int attempt = 0; attempt < 10000; ++attempt) {
        JointVector q;
        for (int i = 0; i < 3; ++i) q[i] = limits.lower[i] + u(rng) * (limits.upper[i] - limits.lower[i]);
        if (jaws_feasible(q)) return q;
    }
    throw Error(ErrorCode::InvalidSpec, "joint limits leave no room for q2 + q3 >= 0");
}

double declared_noise_bound(double sigma) { return 4.0 * sigma + 0.5 / 255.0 + 1e-12; }

void add_pixel_noise(Image& image, double sigma, std::mt19937_64& rng) {
    if (sigma <= 0.0) return;
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& v : image.data()) {
        double z = n(rng);
        while (std::abs(z) > 4.0) z = n(rng);
        v = std::clamp(v + sigma * z, 0.0, 1.0);
    }
}

std::string record_to_line(const GroundTruthRecord& r) {
    ojson j;
    j["index"] = r.index;
    j["config"] = r.config;
    const Mat3 R = r.pose.rotation.matrix();
    ojson pose = ojson::array();
    for (int i = 0; i < 3; ++i) {
        for (int c = 0; c < 3; ++c) pose.push_back(R(i, c));
        pose.push_back(r.pose.translation[i]);
    }
    j["pose"] = pose;
    j["q"] = {r.q[0], r.q[1], r.q[2]};
    j["intrinsics"] = {r.camera.fx, r.camera.fy, r.camera.cx, r.camera.cy, r.camera.width, r.camera.height};
    j["image"] = r.image;
    j["mask"] = r.mask;
    j["depth"] = nullptr;
    j["noise_std"] = r.noise_std;
    j["noise_bound"] = r.noise_bound;
    return j.dump();
}

GroundTruthRecord record_from_line(const std::string& line, const std::string& where) {
    try {
        const json j = parse_document(line, where);
        GroundTruthRecord r;
        r.index = static_cast<int>(as_int(member(j, "index", ""), "index"));
        r.config = static_cast<int>(as_int(member(j, "config", ""), "config"));
        const json& pose = member(j, "pose", "");
        if (!pose.is_array() || pose.size() != 12) bad("pose", "expected 12 numbers");
        Mat4 m = Mat4::Identity();
        for (int i = 0; i < 3; ++i) {
            for (int c = 0; c < 4; ++c) m(i, c) = as_real(pose[static_cast<std::size_t>(4 * i + c)], "pose");
        }
        r.pose = Pose::from_matrix(m);
        r.q = as_vec<3>(member(j, "q", ""), "q");
        const json& k = member(j, "intrinsics", "");
        if (!k.is_array() || k.size() != 6) bad("intrinsics", "expected [fx, fy, cx, cy, width, height]");
        r.camera = Intrinsics::create(as_real(k[0], "intrinsics[0]"), as_real(k[1], "intrinsics[1]"),
                                      as_real(k[2], "intrinsics[2]"), as_real(k[3], "intrinsics[3]"),
                                      static_cast<int>(as_int(k[4], "intrinsics[4]")),
                                      static_cast<int>(as_int(k[5], "intrinsics[5]")));
        r.image = as_string(member(j, "image", ""), "image");
        r.mask = as_string(member(j, "mask", ""), "mask");
        r.noise_std = j.contains("noise_std") ? as_real(j["noise_std"], "noise_std") : 0.0;
        r.noise_bound =
            j.contains("noise_bound") ? as_real(j["noise_bound"], "noise_bound") : declared_noise_bound(r.noise_std);
        return r;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ParseError) throw;
        throw Error(ErrorCode::ParseError, where + ": " + e.what());
    }
}

void save_manifest(const std::filesystem::path& path, const std::vector<GroundTruthRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write manifest " + path.string());
    for (const GroundTruthRecord& r : records) out << record_to_line(r) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path.string());
    DatasetManifest m;
    m.path = path;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        m.records.push_back(record_from_line(line, path.string() + ":" + std::to_string(line_no)));
    }
    if (m.records.empty()) {
        throw Error(ErrorCode::ParseError, path.string() + ": manifest has no records");
    }
    return m;
}

Frame load_record_frame(const DatasetManifest& manifest, const GroundTruthRecord& record) {
    const std::filesystem::path dir = manifest.path.parent_path();
    Frame f;
    f.pixels = read_png(dir / record.image);
    if (!record.mask.empty()) f.mask = read_pgm(dir / record.mask);
    f.validate();
    if (f.pixels.width() != record.camera.width || f.pixels.height() != record.camera.height) {
        throw Error(ErrorCode::DimensionMismatch, "image size differs from the record intrinsics: " + record.image);
    }
    return f;
}

DatasetManifest generate_dataset(const ToolModel& model, const DatasetSpec& spec, const std::filesystem::path& out_dir,
                                 const RenderSettings& settings) {
    spec.validate();
    model.validate();
    make_dirs(out_dir);
    const Intrinsics k = spec.camera.intrinsics();
    const int n_configs = spec.n_canonical + spec.n_posed;
    std::vector<GroundTruthRecord> records(static_cast<std::size_t>(n_configs) * spec.views_per_config);
    std::vector<std::string> failures(static_cast<std::size_t>(n_configs));

#pragma omp parallel for schedule(dynamic)
    for (int c = 0; c < n_configs; ++c) {
        try {
            std::mt19937_64 rng = derived_rng(spec.seed, 1, static_cast<std::uint64_t>(c));
            const JointVector q = c < spec.n_canonical ? JointVector::Zero() : sample_joints(model.limits, rng);
            const Vec3 center = model_centroid(model, q);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            for (int v = 0; v < spec.views_per_config; ++v) {
                const double az = spec.azimuth_min + u(rng) * (spec.azimuth_max - spec.azimuth_min);
                const double el = spec.elevation_min + u(rng) * (spec.elevation_max - spec.elevation_min);
                const double d = spec.distance_min + u(rng) * (spec.distance_max - spec.distance_min);
                GroundTruthRecord& r = records[static_cast<std::size_t>(c * spec.views_per_config + v)];
                r.index = c * spec.views_per_config + v;
                r.config = c;
                r.pose = look_at_pose(center, az, el, d);
                r.q = q;
                r.camera = k;
                r.image = numbered("images", r.index, "png");
                r.mask = numbered("masks", r.index, "pgm");
                r.noise_std = spec.noise_std;
                r.noise_bound = declared_noise_bound(spec.noise_std);
                std::mt19937_64 noise_rng = derived_rng(spec.seed, 2, static_cast<std::uint64_t>(r.index));
                emit_record(model, r, out_dir, settings, noise_rng);
            }
        } catch (const std::exception& e) {
            failures[static_cast<std::size_t>(c)] = e.what();
        }
    }
    for (const std::string& f : failures) {
        if (!f.empty()) throw Error(ErrorCode::IoError, f);
    }
    DatasetManifest m;
    m.path = out_dir / "manifest.jsonl";
    m.records = std::move(records);
    save_manifest(m.path, m.records);
    return m;
}

Trajectory sample_sequence_motion(const ToolModel& model, const SequenceSpec& spec) {
    spec.validate();
    std::mt19937_64 rng = derived_rng(spec.seed, 3, 0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    const double pi = 3.14159265358979323846;
    JointVector q(0.3 * u(rng), 0.35 + 0.25 * u(rng), 0.35 + 0.25 * u(rng));
    q = clamp_joints(q, model.limits);
    if (!jaws_feasible(q)) q = clamp_joints(JointVector::Zero(), model.limits);
    const Rotation r0 = Rotation::about_z(pi * u(rng)) * canonical_view_rotation() *
                        Rotation::exp(Vec3(0.2 * u(rng), 0.2 * u(rng), 0.2 * u(rng)));
    const Vec3 t0 = Vec3(0.0, 0.0, spec.distance) - r0 * model_centroid(model, q);

    Trajectory traj;
    Pose pose{r0, t0};
    Vec3 vt = Vec3::Zero(), vw = Vec3::Zero(), vq = Vec3::Zero();
    const double s = spec.smoothing;
    for (int f = 0; f < spec.n_frames; ++f) {
        if (f > 0) {
            // Mean reversion keeps the tool near its starting pose and view.
            const Vec3 pull_t = -0.1 * (pose.translation - t0);
            const Vec3 pull_w = -0.1 * (pose.rotation * r0.inverse()).log();
            vt = clip_norm(s * vt + (1.0 - s) * clip_norm(sample_ball(spec.max_translation, rng) + pull_t,
                                                          spec.max_translation),
                           spec.max_translation);
            vw = clip_norm(s * vw + (1.0 - s) * clip_norm(sample_ball(spec.max_rotation, rng) + pull_w,
                                                          spec.max_rotation),
                           spec.max_rotation);
            Vec3 step_q;
            for (int i = 0; i < 3; ++i) step_q[i] = spec.max_joint_velocity * u(rng);
            vq = s * vq + (1.0 - s) * step_q;
            pose.rotation = Rotation::exp(vw) * pose.rotation;
            pose.translation += vt;
            JointVector next = clamp_joints(q + vq, model.limits);
            if (jaws_feasible(next)) {
                q = next;
            } else {
                vq.setZero();
            }
        }
        TrajectoryRecord rec;
        rec.frame = f;
        rec.pose = pose;
        rec.q = q;
        traj.records.push_back(rec);
    }
    return traj;
}

SequenceResult generate_sequence(const ToolModel& model, const SequenceSpec& spec,
                                 const std::filesystem::path& out_dir, const RenderSettings& settings) {
    spec.validate();
    model.validate();
    make_dirs(out_dir);
    SequenceResult res;
    res.ground_truth = sample_sequence_motion(model, spec);
    const Intrinsics k = spec.camera.intrinsics();
    res.frames.resize(res.ground_truth.size());
    std::vector<GroundTruthRecord> records;
    for (const TrajectoryRecord& t : res.ground_truth.records) {
        GroundTruthRecord r;
        r.index = t.frame;
        r.config = t.frame;
        r.pose = t.pose;
        r.q = t.q;
        r.camera = k;
        r.image = numbered("images", t.frame, "png");
        r.mask = numbered("masks", t.frame, "pgm");
        r.noise_std = spec.noise_std;
        r.noise_bound = declared_noise_bound(spec.noise_std);
        records.push_back(r);
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        std::mt19937_64 noise_rng = derived_rng(spec.seed, 4, i);
        Frame& f = res.frames[i];
        f.pixels = emit_record(model, records[i], out_dir, settings, noise_rng);
        f.mask = read_pgm(out_dir / records[i].mask);
    }
    save_trajectory(out_dir / "ground_truth.csv", res.ground_truth);
    res.manifest.path = out_dir / "manifest.jsonl";
    res.manifest.records = std::move(records);
    save_manifest(res.manifest.path, res.manifest.records);
    return res;
}

namespace {

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void read_camera(const json& doc, CameraSpec& cam) {
    if (!doc.contains("camera")) return;
    const json& c = doc["camera"];
    for (const auto& [key, value] : c.items()) {
        const std::string path = "camera." + key;
        if (key == "width") cam.width = static_cast<int>(as_int(value, path));
        else if (key == "height") cam.height = static_cast<int>(as_int(value, path));
        else if (key == "focal") cam.focal = as_real(value, path);
        else bad(path, "unknown key");
    }
}

std::uint64_t read_seed(const json& v) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
        bad("seed", "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

}  // namespace

DatasetSpec parse_dataset_spec(const std::string& text, const std::string& source) {
    const json doc = parse_document(text, source);
    if (!doc.is_object()) bad("<root>", "expected an object");
    DatasetSpec s;
    for (const auto& [key, value] : doc.items()) {
        if (key == "n_canonical") s.n_canonical = static_cast<int>(as_int(value, key));
        else if (key == "n_posed") s.n_posed = static_cast<int>(as_int(value, key));
        else if (key == "views_per_config") s.views_per_config = static_cast<int>(as_int(value, key));
        else if (key == "azimuth_min") s.azimuth_min = as_real(value, key);
        else if (key == "azimuth_max") s.azimuth_max = as_real(value, key);
        else if (key == "elevation_min") s.elevation_min = as_real(value, key);
        else if (key == "elevation_max") s.elevation_max = as_real(value, key);
        else if (key == "distance_min") s.distance_min = as_real(value, key);
        else if (key == "distance_max") s.distance_max = as_real(value, key);
        else if (key == "noise_std") s.noise_std = as_real(value, key);
        else if (key == "seed") s.seed = read_seed(value);
        else if (key != "camera") bad(key, "unknown key");
    }
    read_camera(doc, s.camera);
    s.validate();
    return s;
}

SequenceSpec parse_sequence_spec(const std::string& text, const std::string& source) {
    const json doc = parse_document(text, source);
    if (!doc.is_object()) bad("<root>", "expected an object");
    SequenceSpec s;
    for (const auto& [key, value] : doc.items()) {
        if (key == "n_frames") s.n_frames = static_cast<int>(as_int(value, key));
        else if (key == "max_translation") s.max_translation = as_real(value, key);
        else if (key == "max_rotation") s.max_rotation = as_real(value, key);
        else if (key == "max_joint_velocity") s.max_joint_velocity = as_real(value, key);
        else if (key == "smoothing") s.smoothing = as_real(value, key);
        else if (key == "noise_std") s.noise_std = as_real(value, key);
        else if (key == "distance") s.distance = as_real(value, key);
        else if (key == "seed") s.seed = read_seed(value);
        else if (key != "camera") bad(key, "unknown key");
    }
    read_camera(doc, s.camera);
    s.validate();
    return s;
}

DatasetSpec load_dataset_spec(const std::filesystem::path& path) {
    return parse_dataset_spec(read_text(path), path.string());
}

SequenceSpec load_sequence_spec(const std::filesystem::path& path) {
    return parse_sequence_spec(read_text(path), path.string());
}

double mean_view_loss(const ToolModel& model, const std::vector<FitView>& views, const LossConfig& loss,
                      const RenderSettings& render_settings) {
    double sum = 0.0;
    const JointVector q0 = JointVector::Zero();
    for (const FitView& v : views) {
        const RenderOutput out = render(pose_gaussians(model, v.camera, q0), v.intrinsics, render_settings);
        sum += combined_loss(out.image.pixels, v.image, loss);
    }
    return sum / static_cast<double>(views.size());
}

namespace {

struct Adam {
    std::vector<double> m, v;
    int t = 0;
    static constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;

    explicit Adam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    // Returns the step for parameter i (to be subtracted), given its gradient.
    double step(std::size_t i, double g, double lr) {
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        const double mh = m[i] / (1.0 - std::pow(b1, t));
        const double vh = v[i] / (1.0 - std::pow(b2, t));
        return lr * mh / (std::sqrt(vh) + eps);
    }
};

}  // namespace

FitResult fit_canonical_model(const ToolModel& init, const std::vector<FitView>& views, const FitConfig& cfg) {
    if (views.size() < 2) {
        throw Error(ErrorCode::InsufficientViews, "fit_canonical_model needs at least 2 views, got " +
                                                      std::to_string(views.size()));
    }
    init.validate();
    cfg.loss.validate();
    if (cfg.iters < 0) throw Error(ErrorCode::InvalidArgument, "iters must be >= 0");

    FitResult res;
    res.model = init;
    ToolModel& model = res.model;
    const JointVector q0 = JointVector::Zero();
    const std::size_t n = model.gaussians.size();
    constexpr std::size_t kParams = 10;  // mean 3, scale 3, opacity 1, color 3
    Adam adam(n * kParams);
    res.initial_loss = mean_view_loss(model, views, cfg.loss, cfg.render);

    const std::vector<Pose> links = forward_kinematics(model, q0);
    for (int it = 0; it < cfg.iters; ++it) {
        std::vector<double> grad(n * kParams, 0.0);
        for (const FitView& view : views) {
            const std::vector<PosedGaussian> posed = pose_gaussians(model, view.camera, q0);
            const RenderOutput out = render(posed, view.intrinsics, cfg.render);
            const LossGradient lg = combined_loss_gradient(out.image.pixels, view.image, cfg.loss);
            const std::vector<GaussianGradient> gg = render_backward_gaussians(out, lg.gradient, posed);
            for (std::size_t i = 0; i < n; ++i) {
                const GaussianPrimitive& g = model.gaussians[i];
                const Mat3 r_link = (view.camera.rotation * links[static_cast<std::size_t>(g.link)].rotation).matrix();
                const Mat3 r_tot = r_link * g.orient_local.matrix();
                const Vec3 d_mean = r_link.transpose() * gg[i].mean_cam;
                const Mat3 local_cov_grad = r_tot.transpose() * gg[i].cov_cam * r_tot;
                double* p = grad.data() + i * kParams;
                for (int a = 0; a < 3; ++a) {
                    p[a] += d_mean[a];
                    p[3 + a] += 2.0 * g.scale[a] * local_cov_grad(a, a);
                    p[7 + a] += gg[i].color[a];
                }
                p[6] += gg[i].opacity;
            }
        }
        const double inv_views = 1.0 / static_cast<double>(views.size());
        ++adam.t;
        for (std::size_t i = 0; i < n; ++i) {
            GaussianPrimitive& g = model.gaussians[i];
            const std::size_t b = i * kParams;
            for (int a = 0; a < 3; ++a) {
                g.mean_local[a] -= adam.step(b + a, grad[b + a] * inv_views, cfg.lr_mean);
                g.scale[a] = std::clamp(g.scale[a] - adam.step(b + 3 + a, grad[b + 3 + a] * inv_views, cfg.lr_scale),
                                        cfg.min_scale, cfg.max_scale);
                g.color[a] =
                    std::clamp(g.color[a] - adam.step(b + 7 + a, grad[b + 7 + a] * inv_views, cfg.lr_color), 0.0, 1.0);
            }
            g.opacity = std::clamp(g.opacity - adam.step(b + 6, grad[b + 6] * inv_views, cfg.lr_opacity), 0.0, 1.0);
        }
    }
    res.final_loss = mean_view_loss(model, views, cfg.loss, cfg.render);
    return res;
}

}  // namespace toolpose
