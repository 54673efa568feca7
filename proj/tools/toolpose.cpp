// Command-line front end: synthetic data, tracking, evaluation, model fitting
// and the gradient check.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "toolpose/config.hpp"
#include "toolpose/errors.hpp"
#include "toolpose/estimator.hpp"
#include "toolpose/gradcheck.hpp"
#include "toolpose/metrics.hpp"
#include "toolpose/model_io.hpp"
#include "toolpose/synthlab.hpp"
#include "toolpose/trajectory.hpp"

namespace fs = std::filesystem;
using namespace toolpose;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument:
            return kExitUsage;
        case ErrorCode::NonFiniteLoss:
        case ErrorCode::AllCandidatesDiverged:
        case ErrorCode::RenderFailure:
            return kExitNumerical;
        default:
            return kExitData;
    }
}

void configure_logging() {
    const char* level = std::getenv("TOOLPOSE_LOG");
    spdlog::set_pattern("[%l] %v");
    if (level) {
        spdlog::set_level(spdlog::level::from_str(level));
    } else {
        spdlog::set_level(spdlog::level::info);
    }
}

ToolModel model_or_default(const std::string& path) {
    if (path.empty()) return default_tool_model();
    return load_tool_model(path);
}

DatasetManifest open_frames(const fs::path& frames) {
    if (fs::is_directory(frames)) return load_manifest(frames / "manifest.jsonl");
    return load_manifest(frames);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
}

std::string flag_name(const std::string& key) {
    std::string s = "--" + key;
    for (char& c : s) {
        if (c == '_') c = '-';
    }
    return s;
}

struct TrackArgs {
    std::string frames, model, config, out, log_csv;
    bool init_from_manifest = false;
    std::map<std::string, double> overrides;
};

int run_track(const TrackArgs& a, const std::map<std::string, CLI::Option*>& flags) {
    TrackingConfig cfg = a.config.empty() ? TrackingConfig{} : load_tracking_config(a.config);
    for (const auto& [name, opt] : flags) {
        if (opt->count() > 0) set_config_value(cfg, name, a.overrides.at(name));
    }
    validate_tracking_config(cfg);
    const ToolModel model = model_or_default(a.model);
    const DatasetManifest manifest = open_frames(a.frames);
    const Intrinsics k = manifest.records.front().camera;
    std::vector<Frame> frames;
    frames.reserve(manifest.records.size());
    for (const GroundTruthRecord& r : manifest.records) {
        if (!(r.camera == k)) throw Error(ErrorCode::InvalidSpec, "frames use different intrinsics: " + r.image);
        frames.push_back(load_record_frame(manifest, r));
    }
    spdlog::info("tracking {} frames at {}x{}", frames.size(), k.width, k.height);

    std::optional<FrameEstimate> initial;
    if (a.init_from_manifest) {
        FrameEstimate e;
        e.pose = manifest.records.front().pose;
        e.q = manifest.records.front().q;
        initial = e;
    }
    Tracker tracker(model, k, cfg);
    std::vector<TrackedFrame> tracked;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const TrackedFrame tf =
            tracker.update(manifest.records[i].index, frames[i], i == 0 ? initial : std::nullopt);
        if (tf.failed) {
            spdlog::warn("frame {}: {}; keeping previous estimate", tf.frame_index, tf.error);
        } else {
            spdlog::debug("frame {}: loss {:.3e} after {} iterations", tf.frame_index, tf.estimate.final_loss,
                          tf.estimate.iters_used);
        }
        tracked.push_back(tf);
    }
    save_trajectory(a.out, to_trajectory(tracked));
    spdlog::info("wrote {}", a.out);
    return kExitOk;
}

int run_eval(const std::string& est, const std::string& gt, const std::string& report, const std::string& curves,
             const std::string& batch) {
    std::ostringstream text;
    if (!batch.empty()) {
        // Each line: {"est": "...", "gt": "..."}, paths relative to the batch file.
        std::ifstream in(batch);
        if (!in) throw Error(ErrorCode::IoError, "cannot open batch manifest " + batch);
        const fs::path dir = fs::path(batch).parent_path();
        std::vector<MetricsReport> reports;
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error& e) {
                throw Error(ErrorCode::ParseError, batch + ":" + std::to_string(line_no) + ": " + e.what());
            }
            if (!j.is_object() || !j.contains("est") || !j.contains("gt") || !j["est"].is_string() ||
                !j["gt"].is_string()) {
                throw Error(ErrorCode::ParseError,
                            batch + ":" + std::to_string(line_no) + ": expected {\"est\": path, \"gt\": path}");
            }
            const Trajectory e = load_trajectory(dir / j["est"].get<std::string>());
            const Trajectory g = load_trajectory(dir / j["gt"].get<std::string>());
            reports.push_back(evaluate(e, g));
            text << "## " << j["est"].get<std::string>() << '\n';
            write_report(text, reports.back());
        }
        write_summary(text, aggregate_reports(reports));
    } else {
        if (est.empty() || gt.empty()) throw Error(ErrorCode::InvalidArgument, "eval needs --est and --gt, or --batch");
        const Trajectory e = load_trajectory(est);
        const Trajectory g = load_trajectory(gt);
        write_report(text, evaluate(e, g));
        if (!curves.empty()) {
            std::ofstream out(curves);
            if (!out) throw Error(ErrorCode::IoError, "cannot write " + curves);
            write_error_curves(out, e, g);
        }
    }
    if (report.empty()) {
        std::cout << text.str();
    } else {
        write_text(report, text.str());
        spdlog::info("wrote {}", report);
    }
    return kExitOk;
}

int run_fit(const std::string& init, const std::string& views_path, int iters, const std::string& out) {
    const ToolModel model = model_or_default(init);
    const DatasetManifest manifest = open_frames(views_path);
    std::vector<FitView> views;
    for (const GroundTruthRecord& r : manifest.records) {
        if (r.q != JointVector::Zero()) continue;
        views.push_back({load_record_frame(manifest, r).pixels, r.pose, r.camera});
    }
    spdlog::info("fitting on {} neutral-configuration views", views.size());
    FitConfig cfg;
    cfg.iters = iters;
    const FitResult res = fit_canonical_model(model, views, cfg);
    spdlog::info("mean loss {:.4e} -> {:.4e}", res.initial_loss, res.final_loss);
    save_tool_model(out, res.model);
    return kExitOk;
}

int run_gradcheck_cmd(std::uint64_t seed, int trials) {
    GradcheckConfig cfg;
    cfg.seed = seed;
    cfg.trials = trials;
    const GradcheckReport r = run_gradcheck(cfg);
    for (std::size_t i = 0; i < r.instances.size(); ++i) {
        if (r.instances[i].pass) continue;
        for (int c = 0; c < 9; ++c) {
            const GradcheckComponent& g = r.instances[i].components[static_cast<std::size_t>(c)];
            if (g.error > cfg.rel_tol) {
                spdlog::error("instance {} {}: analytic {:.6e} numeric {:.6e} error {:.2e}", i,
                              gradcheck_component_name(c), g.analytic, g.numeric, g.error);
            }
        }
    }
    std::cout << "gradcheck: " << r.instances.size() << " instances, " << r.failures << " failed, max error "
              << r.max_error << ", resampled " << r.resampled << ", " << r.seconds << " s\n";
    return r.pass() ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
    configure_logging();
    CLI::App app{"Render-and-compare pose and joint tracking for articulated surgical tools"};
    app.require_subcommand(1);

    std::string spec, out, model;
    auto* synth = app.add_subcommand("synth", "generate synthetic data");
    synth->require_subcommand(1);
    auto* synth_dataset = synth->add_subcommand("dataset", "multi-view dataset");
    auto* synth_sequence = synth->add_subcommand("sequence", "motion sequence with ground-truth trajectory");
    for (CLI::App* sub : {synth_dataset, synth_sequence}) {
        sub->add_option("--spec", spec, "JSON spec file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory")->required();
        sub->add_option("--model", model, "tool model JSON (default: built-in)");
    }

    TrackArgs track_args;
    auto* track = app.add_subcommand("track", "track a frame sequence");
    track->add_option("--frames", track_args.frames, "frame directory or manifest.jsonl")->required();
    track->add_option("--model", track_args.model, "tool model JSON (default: built-in)");
    track->add_option("--config", track_args.config, "tracking config JSON");
    track->add_option("--out", track_args.out, "output trajectory CSV")->required();
    track->add_flag("--init-from-manifest", track_args.init_from_manifest,
                    "start from the first record's pose instead of the coarse search");
    std::map<std::string, CLI::Option*> override_flags;
    for (const ConfigKey& key : tracking_config_keys()) {
        track_args.overrides[key.name] = 0.0;
        override_flags[key.name] =
            track->add_option(flag_name(key.name), track_args.overrides[key.name], key.help + " (" + key.section + ")")
                ->type_name("NUMBER");
    }

    std::string est, gt, report, curves, batch;
    auto* eval = app.add_subcommand("eval", "trajectory metrics");
    eval->add_option("--est", est, "estimated trajectory CSV");
    eval->add_option("--gt", gt, "ground-truth trajectory CSV");
    eval->add_option("--report", report, "report file (default: stdout)");
    eval->add_option("--curves", curves, "per-frame error CSV");
    eval->add_option("--batch", batch, "JSON-lines file of {\"est\", \"gt\"} pairs");

    std::string fit_init, fit_views, fit_out;
    int fit_iters = 200;
    auto* fit = app.add_subcommand("fit", "fit Gaussian appearance to neutral-configuration views");
    fit->add_option("--init", fit_init, "initial tool model JSON (default: built-in)");
    fit->add_option("--views", fit_views, "dataset directory or manifest.jsonl")->required();
    fit->add_option("--iters", fit_iters, "iterations")->check(CLI::NonNegativeNumber);
    fit->add_option("--out", fit_out, "output model JSON")->required();

    std::uint64_t gc_seed = 0;
    int gc_trials = 100;
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the analytic gradient");
    gradcheck->add_option("--seed", gc_seed, "random seed");
    gradcheck->add_option("--trials", gc_trials, "number of scenes")->check(CLI::PositiveNumber);

    std::string model_out;
    auto* model_cmd = app.add_subcommand("model", "write the built-in tool model as JSON");
    model_cmd->add_option("--out", model_out, "output file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (synth_dataset->parsed()) {
            const DatasetManifest m = generate_dataset(model_or_default(model), load_dataset_spec(spec), out);
            spdlog::info("wrote {} records to {}", m.records.size(), m.path.string());
            return kExitOk;
        }
        if (synth_sequence->parsed()) {
            const SequenceResult r = generate_sequence(model_or_default(model), load_sequence_spec(spec), out);
            spdlog::info("wrote {} frames to {}", r.frames.size(), out);
            return kExitOk;
        }
        if (track->parsed()) return run_track(track_args, override_flags);
        if (eval->parsed()) return run_eval(est, gt, report, curves, batch);
        if (fit->parsed()) return run_fit(fit_init, fit_views, fit_iters, fit_out);
        if (gradcheck->parsed()) return run_gradcheck_cmd(gc_seed, gc_trials);
        if (model_cmd->parsed()) {
            save_tool_model(model_out, default_tool_model());
            return kExitOk;
        }
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitData;
    }
    return kExitUsage;
}
