#include "toolpose/model_io.hpp"

#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace toolpose {

using namespace detail;

namespace {

Pose read_offset(const json& j, const std::string& path) {
    Pose p;
    if (j.contains("translation")) p.translation = as_vec<3>(j["translation"], join(path, "translation"));
    if (j.contains("axis_angle")) p.rotation = Rotation::exp(as_vec<3>(j["axis_angle"], join(path, "axis_angle")));
    return p;
}

}  // namespace

ToolModel parse_tool_model(const std::string& text, const std::string& source) {
    const json doc = parse_document(text, source);
    ToolModel m;
    m.shaft_length = as_real(member(doc, "shaft_length", ""), "shaft_length");
    const json& limits = member(doc, "limits", "");
    m.limits.lower = as_vec<3>(member(limits, "lower", "limits"), "limits.lower");
    m.limits.upper = as_vec<3>(member(limits, "upper", "limits"), "limits.upper");

    const json& links = member(doc, "links", "");
    if (!links.is_array()) bad("links", "expected an array");
    for (std::size_t i = 0; i < links.size(); ++i) {
        const std::string at = join("links", i);
        const json& lj = links[i];
        Link l;
        l.name = lj.contains("name") ? as_string(lj["name"], join(at, "name")) : "";
        l.parent = static_cast<int>(as_int(member(lj, "parent", at), join(at, "parent")));
        if (lj.contains("offset")) l.offset = read_offset(lj["offset"], join(at, "offset"));
        const std::string kind = as_string(member(lj, "joint", at), join(at, "joint"));
        if (kind == "revolute") {
            l.kind = JointKind::Revolute;
            l.axis = as_vec<3>(member(lj, "axis", at), join(at, "axis"));
            l.joint_index = static_cast<int>(as_int(member(lj, "joint_index", at), join(at, "joint_index")));
        } else if (kind == "fixed") {
            l.kind = JointKind::Fixed;
            if (lj.contains("axis")) l.axis = as_vec<3>(lj["axis"], join(at, "axis"));
        } else {
            bad(join(at, "joint"), "expected \"fixed\" or \"revolute\"");
        }
        m.links.push_back(std::move(l));
    }

    const json& gaussians = member(doc, "gaussians", "");
    if (!gaussians.is_array()) bad("gaussians", "expected an array");
    m.gaussians.reserve(gaussians.size());
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        const std::string at = join("gaussians", i);
        const json& gj = gaussians[i];
        GaussianPrimitive g;
        g.link = static_cast<int>(as_int(member(gj, "link", at), join(at, "link")));
        g.mean_local = as_vec<3>(member(gj, "mean", at), join(at, "mean"));
        g.scale = as_vec<3>(member(gj, "scale", at), join(at, "scale"));
        if (gj.contains("orient_axis_angle")) {
            g.orient_local = Rotation::exp(as_vec<3>(gj["orient_axis_angle"], join(at, "orient_axis_angle")));
        }
        g.opacity = as_real(member(gj, "opacity", at), join(at, "opacity"));
        g.color = as_vec<3>(member(gj, "color", at), join(at, "color"));
        m.gaussians.push_back(g);
    }
    m.validate();
    return m;
}

std::string tool_model_to_string(const ToolModel& m) {
    json doc;
    doc["shaft_length"] = m.shaft_length;
    doc["limits"] = {{"lower", to_json(m.limits.lower)}, {"upper", to_json(m.limits.upper)}};
    json links = json::array();
    for (const Link& l : m.links) {
        json lj;
        lj["name"] = l.name;
        lj["parent"] = l.parent;
        lj["offset"] = {{"translation", to_json(l.offset.translation)},
                        {"axis_angle", to_json(l.offset.rotation.log())}};
        lj["joint"] = l.kind == JointKind::Revolute ? "revolute" : "fixed";
        lj["axis"] = to_json(l.axis);
        if (l.kind == JointKind::Revolute) lj["joint_index"] = l.joint_index;
        links.push_back(std::move(lj));
    }
    doc["links"] = std::move(links);
    json gaussians = json::array();
    for (const GaussianPrimitive& g : m.gaussians) {
        gaussians.push_back({{"link", g.link},
                             {"mean", to_json(g.mean_local)},
                             {"scale", to_json(g.scale)},
                             {"orient_axis_angle", to_json(g.orient_local.log())},
                             {"opacity", g.opacity},
                             {"color", to_json(g.color)}});
    }
    doc["gaussians"] = std::move(gaussians);
    return doc.dump(2) + "\n";
}

ToolModel load_tool_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open tool model " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_tool_model(ss.str(), path.string());
}

void save_tool_model(const std::filesystem::path& path, const ToolModel& model) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write tool model " + path.string());
    }
    out << tool_model_to_string(model);
    if (!out) {
        throw Error(ErrorCode::IoError, "write failed for " + path.string());
    }
}

}  // namespace toolpose
