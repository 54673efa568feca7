#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "toolpose/geometry.hpp"
#include "toolpose/tool_model.hpp"

namespace toolpose {

struct TrajectoryRecord {
    int frame = 0;
    Pose pose;
    JointVector q = JointVector::Zero();
    std::optional<double> loss;

    bool operator==(const TrajectoryRecord&) const = default;
};

/// Time-ordered (pose, joints) samples; frame indices strictly increase.
struct Trajectory {
    std::vector<TrajectoryRecord> records;

    std::size_t size() const { return records.size(); }
    /// Throws InvalidArgument when empty or when frame indices do not increase.
    void validate() const;
    bool operator==(const Trajectory&) const = default;
};

inline constexpr const char* kTrajectoryHeader =
    "frame,R00,R01,R02,R10,R11,R12,R20,R21,R22,tx,ty,tz,q1,q2,q3,loss";

/// CSV with kTrajectoryHeader; reals use shortest round-trip formatting, an
/// absent loss is an empty field.
void write_trajectory(std::ostream& os, const Trajectory& traj);
/// Throws ParseError naming the offending line.
Trajectory read_trajectory(std::istream& is, const std::string& source = "<stream>");

void save_trajectory(const std::filesystem::path& path, const Trajectory& traj);
Trajectory load_trajectory(const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly the same double.
std::string format_real(double v);

}  // namespace toolpose
