#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "toolpose/estimator.hpp"

namespace toolpose {

// Tracking configuration files are JSON with optional sections:
//
//   {"refiner": {"lr_rot": 0.3, ...}, "coarse": {...}, "loss": {...},
//    "render": {"background": [0, 0, 0], "alpha_cutoff": 0.0039, "z_min": 1e-4}}
//
// Scalar keys are unique across sections, so each one also works as a CLI flag
// (lr_rot becomes --lr-rot).

struct ConfigKey {
    std::string section;
    std::string name;
    std::string help;
};

const std::vector<ConfigKey>& tracking_config_keys();

/// Sets one scalar key; integer keys reject fractional values and booleans
/// take 0 or 1. Throws InvalidSpec for unknown keys or bad values.
void set_config_value(TrackingConfig& cfg, const std::string& name, double value);
double get_config_value(const TrackingConfig& cfg, const std::string& name);

/// Throws ParseError for malformed JSON and InvalidSpec for unknown keys or
/// values that break a config invariant.
TrackingConfig parse_tracking_config(const std::string& text, const std::string& source = "<string>");
std::string tracking_config_to_string(const TrackingConfig& cfg);
TrackingConfig load_tracking_config(const std::filesystem::path& path);

/// Runs every section's validate(); failures are reported as InvalidSpec.
void validate_tracking_config(const TrackingConfig& cfg);

}  // namespace toolpose
