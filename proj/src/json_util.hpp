#pragma once

// Small helpers for reading JSON documents with path-like error locators.

#include <string>

#include <nlohmann/json.hpp>

#include "toolpose/errors.hpp"
#include "toolpose/geometry.hpp"

namespace toolpose::detail {

using nlohmann::json;

[[noreturn]] inline void bad(const std::string& path, const std::string& what) {
    throw Error(ErrorCode::InvalidSpec, path + ": " + what);
}

inline std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline std::string join(const std::string& path, std::size_t index) {
    return path + "[" + std::to_string(index) + "]";
}

inline const json& member(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object()) bad(path.empty() ? "<root>" : path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) bad(join(path, key), "missing");
    return *it;
}

inline double as_real(const json& v, const std::string& path) {
    if (!v.is_number()) bad(path, "expected a number");
    return v.get<double>();
}

inline long long as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) bad(path, "expected an integer");
    return v.get<long long>();
}

inline bool as_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) bad(path, "expected true or false");
    return v.get<bool>();
}

inline std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) bad(path, "expected a string");
    return v.get<std::string>();
}

template <int N>
Eigen::Matrix<double, N, 1> as_vec(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != static_cast<std::size_t>(N)) {
        bad(path, "expected an array of " + std::to_string(N) + " numbers");
    }
    Eigen::Matrix<double, N, 1> out;
    for (int i = 0; i < N; ++i) out[i] = as_real(v[static_cast<std::size_t>(i)], join(path, static_cast<std::size_t>(i)));
    return out;
}

inline json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline json parse_document(const std::string& text, const std::string& source) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, source + ": " + e.what());
    }
}

}  // namespace toolpose::detail
