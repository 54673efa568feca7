#pragma once

#include <filesystem>
#include <string>

#include "toolpose/tool_model.hpp"

namespace toolpose {

// Tool model files are JSON:
//
//   {
//     "shaft_length": 0.02,
//     "limits": {"lower": [..3], "upper": [..3]},
//     "links": [{"name": "shaft", "parent": -1,
//                "offset": {"translation": [..3], "axis_angle": [..3]},
//                "joint": "fixed" | "revolute", "axis": [..3], "joint_index": 0}],
//     "gaussians": [{"link": 0, "mean": [..3], "scale": [..3],
//                    "orient_axis_angle": [..3], "opacity": 0.85, "color": [..3]}]
//   }
//
// Errors name the offending element with a path such as "gaussians[12].scale".

/// Throws ParseError for malformed JSON and InvalidSpec for a bad model.
ToolModel parse_tool_model(const std::string& text, const std::string& source = "<string>");
std::string tool_model_to_string(const ToolModel& model);

ToolModel load_tool_model(const std::filesystem::path& path);
void save_tool_model(const std::filesystem::path& path, const ToolModel& model);

}  // namespace toolpose
