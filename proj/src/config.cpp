#include "toolpose/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "json_util.hpp"

namespace toolpose {

using namespace detail;

namespace {

enum class Kind { Real, Integer, Boolean };

struct Entry {
    ConfigKey key;
    Kind kind;
    std::function<double&(TrackingConfig&)> real;
    std::function<int&(TrackingConfig&)> integer;
    std::function<bool&(TrackingConfig&)> boolean;
};

Entry real(std::string section, std::string name, std::string help, double& (*ref)(TrackingConfig&)) {
    return {{std::move(section), std::move(name), std::move(help)}, Kind::Real, ref, {}, {}};
}
Entry integer(std::string section, std::string name, std::string help, int& (*ref)(TrackingConfig&)) {
    return {{std::move(section), std::move(name), std::move(help)}, Kind::Integer, {}, ref, {}};
}
Entry boolean(std::string section, std::string name, std::string help, bool& (*ref)(TrackingConfig&)) {
    return {{std::move(section), std::move(name), std::move(help)}, Kind::Boolean, {}, {}, ref};
}

const std::vector<Entry>& entries() {
    static const std::vector<Entry> table = {
        real("refiner", "lr_rot", "rotation learning rate", [](TrackingConfig& c) -> double& { return c.refiner.lr_rot; }),
        real("refiner", "lr_trans", "translation learning rate", [](TrackingConfig& c) -> double& { return c.refiner.lr_trans; }),
        real("refiner", "trans_clamp", "translation gradient clamp (m)", [](TrackingConfig& c) -> double& { return c.refiner.trans_clamp; }),
        real("refiner", "lr_joint", "joint learning rate", [](TrackingConfig& c) -> double& { return c.refiner.lr_joint; }),
        real("refiner", "scheduler_factor", "plateau scheduler factor", [](TrackingConfig& c) -> double& { return c.refiner.scheduler_factor; }),
        integer("refiner", "scheduler_patience", "plateau scheduler patience", [](TrackingConfig& c) -> int& { return c.refiner.scheduler_patience; }),
        real("refiner", "early_stop_delta", "early stop threshold", [](TrackingConfig& c) -> double& { return c.refiner.early_stop_delta; }),
        integer("refiner", "early_stop_window", "early stop window", [](TrackingConfig& c) -> int& { return c.refiner.early_stop_window; }),
        integer("refiner", "max_iters_first_frame", "iteration cap for the first frame", [](TrackingConfig& c) -> int& { return c.refiner.max_iters_first_frame; }),
        integer("refiner", "max_iters_tracking", "iteration cap for later frames", [](TrackingConfig& c) -> int& { return c.refiner.max_iters_tracking; }),
        boolean("refiner", "reset_lr_per_frame", "restore learning rates at each frame (0/1)", [](TrackingConfig& c) -> bool& { return c.refiner.reset_lr_per_frame; }),
        integer("coarse", "grid_size", "coarse grid points per side", [](TrackingConfig& c) -> int& { return c.coarse.grid_size; }),
        real("coarse", "grid_extent", "grid spacing / mask bbox diagonal", [](TrackingConfig& c) -> double& { return c.coarse.grid_extent; }),
        integer("coarse", "n_rotations", "in-plane rotation hypotheses", [](TrackingConfig& c) -> int& { return c.coarse.n_rotations; }),
        real("coarse", "init_depth", "candidate depth (m)", [](TrackingConfig& c) -> double& { return c.coarse.init_depth; }),
        integer("coarse", "refine_iters_per_candidate", "refinement budget per candidate", [](TrackingConfig& c) -> int& { return c.coarse.refine_iters_per_candidate; }),
        integer("coarse", "search_resolution", "longest image side for the coarse search, 0 keeps full size", [](TrackingConfig& c) -> int& { return c.coarse.search_resolution; }),
        boolean("coarse", "reject_off_view", "drop candidates whose centroid left the image (0/1)", [](TrackingConfig& c) -> bool& { return c.coarse.reject_off_view; }),
        real("loss", "alpha_blend", "SSIM weight in the combined loss", [](TrackingConfig& c) -> double& { return c.loss.alpha_blend; }),
        integer("loss", "ssim_window", "SSIM window size (odd)", [](TrackingConfig& c) -> int& { return c.loss.ssim_window; }),
        real("loss", "ssim_sigma", "SSIM window sigma", [](TrackingConfig& c) -> double& { return c.loss.ssim_sigma; }),
        real("loss", "ssim_c1", "SSIM C1", [](TrackingConfig& c) -> double& { return c.loss.ssim_c1; }),
        real("loss", "ssim_c2", "SSIM C2", [](TrackingConfig& c) -> double& { return c.loss.ssim_c2; }),
        real("loss", "support_threshold", "alpha threshold for pixel-averaged loss", [](TrackingConfig& c) -> double& { return c.loss.support_threshold; }),
        real("render", "alpha_cutoff", "skip splat contributions below this alpha", [](TrackingConfig& c) -> double& { return c.render.alpha_cutoff; }),
        real("render", "z_min", "near clipping depth (m)", [](TrackingConfig& c) -> double& { return c.render.z_min; }),
    };
    return table;
}

const Entry& find(const std::string& name) {
    for (const Entry& e : entries()) {
        if (e.key.name == name) return e;
    }
    bad(name, "unknown configuration key");
}

}  // namespace

const std::vector<ConfigKey>& tracking_config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> out;
        for (const Entry& e : entries()) out.push_back(e.key);
        return out;
    }();
    return keys;
}

void set_config_value(TrackingConfig& cfg, const std::string& name, double value) {
    const Entry& e = find(name);
    const std::string path = e.key.section + "." + name;
    if (!std::isfinite(value)) bad(path, "must be finite");
    switch (e.kind) {
        case Kind::Real:
            e.real(cfg) = value;
            break;
        case Kind::Integer:
            if (value != std::floor(value) || std::abs(value) > 1e9) bad(path, "expected an integer");
            e.integer(cfg) = static_cast<int>(value);
            break;
        case Kind::Boolean:
            if (value != 0.0 && value != 1.0) bad(path, "expected 0 or 1");
            e.boolean(cfg) = value == 1.0;
            break;
    }
}

double get_config_value(const TrackingConfig& cfg, const std::string& name) {
    const Entry& e = find(name);
    auto& c = const_cast<TrackingConfig&>(cfg);
    switch (e.kind) {
        case Kind::Real:
            return e.real(c);
        case Kind::Integer:
            return e.integer(c);
        case Kind::Boolean:
            return e.boolean(c) ? 1.0 : 0.0;
    }
    return 0.0;
}

void validate_tracking_config(const TrackingConfig& cfg) {
    try {
        cfg.refiner.validate();
        cfg.coarse.validate();
        cfg.loss.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::InvalidSpec, e.what());
    }
    if (!(cfg.render.alpha_cutoff >= 0.0 && cfg.render.alpha_cutoff < 1.0)) {
        bad("render.alpha_cutoff", "must lie in [0, 1)");
    }
    if (!(cfg.render.z_min > 0.0)) bad("render.z_min", "must be positive");
    if (!(cfg.render.background.minCoeff() >= 0.0 && cfg.render.background.maxCoeff() <= 1.0)) {
        bad("render.background", "components must lie in [0, 1]");
    }
}

TrackingConfig parse_tracking_config(const std::string& text, const std::string& source) {
    const json doc = parse_document(text, source);
    if (!doc.is_object()) bad("<root>", "expected an object");
    TrackingConfig cfg;
    for (const auto& [section, body] : doc.items()) {
        if (section != "refiner" && section != "coarse" && section != "loss" && section != "render") {
            bad(section, "unknown section");
        }
        if (!body.is_object()) bad(section, "expected an object");
        for (const auto& [name, value] : body.items()) {
            const std::string path = section + "." + name;
            if (section == "render" && name == "background") {
                cfg.render.background = as_vec<3>(value, path);
                continue;
            }
            if (section == "coarse" && name == "base_axis_angle") {
                cfg.coarse.base_rotation = Rotation::exp(as_vec<3>(value, path));
                continue;
            }
            const Entry* entry = nullptr;
            for (const Entry& e : entries()) {
                if (e.key.name == name && e.key.section == section) entry = &e;
            }
            if (!entry) bad(path, "unknown key");
            if (entry->kind == Kind::Boolean) {
                set_config_value(cfg, name, as_bool(value, path) ? 1.0 : 0.0);
            } else if (entry->kind == Kind::Integer) {
                set_config_value(cfg, name, static_cast<double>(as_int(value, path)));
            } else {
                set_config_value(cfg, name, as_real(value, path));
            }
        }
    }
    validate_tracking_config(cfg);
    return cfg;
}

std::string tracking_config_to_string(const TrackingConfig& cfg) {
    json doc = json::object();
    for (const Entry& e : entries()) {
        const double v = get_config_value(cfg, e.key.name);
        switch (e.kind) {
            case Kind::Real:
                doc[e.key.section][e.key.name] = v;
                break;
            case Kind::Integer:
                doc[e.key.section][e.key.name] = static_cast<int>(v);
                break;
            case Kind::Boolean:
                doc[e.key.section][e.key.name] = v != 0.0;
                break;
        }
    }
    doc["render"]["background"] = to_json(cfg.render.background);
    doc["coarse"]["base_axis_angle"] = to_json(cfg.coarse.base_rotation.log());
    return doc.dump(2) + "\n";
}

TrackingConfig load_tracking_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open config " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_tracking_config(ss.str(), path.string());
}

}  // namespace toolpose
