#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "toolpose/geometry.hpp"
#include "toolpose/trajectory.hpp"

namespace toolpose {

// Positional metrics compare translations only. Both trajectories must have the
// same length and the same frame indices (LengthMismatch, IndexMismatch).

/// Average displacement error: mean over frames of |p_est - p_gt|.
double ade(const Trajectory& est, const Trajectory& gt);
/// Final displacement error: |p_est - p_gt| at the last frame.
double fde(const Trajectory& est, const Trajectory& gt);

struct AxisError {
    Vec3 mean = Vec3::Zero();  // signed, est - gt
    Vec3 std = Vec3::Zero();   // population (divide by T)
};
AxisError per_axis_error(const Trajectory& est, const Trajectory& gt);

struct MetricsReport {
    double ade = 0.0;
    double fde = 0.0;
    Vec3 mean_error_xyz = Vec3::Zero();
    Vec3 std_error_xyz = Vec3::Zero();
    std::vector<double> per_frame_errors;

    // Diagnostics outside the positional metrics.
    std::vector<double> per_frame_rotation_errors;  // geodesic angle, rad
    double mean_rotation_error = 0.0;
    Vec3 mean_joint_abs_error = Vec3::Zero();
};

MetricsReport evaluate(const Trajectory& est, const Trajectory& gt);

struct Stat {
    double mean = 0.0;
    double std = 0.0;
};

/// Cross-trajectory summary: mean and population std of each report field.
struct AggregateSummary {
    std::size_t count = 0;
    Stat ade;
    Stat fde;
    Stat mean_error_xyz[3];
    Stat std_error_xyz[3];
    Stat rotation_error;
};

/// Throws EmptyInput for an empty list.
AggregateSummary aggregate_reports(std::span<const MetricsReport> reports);

/// "[-4.64, 0.25, 6.64]" with v given in meters and printed in millimeters.
std::string format_vector_mm(const Vec3& v, int decimals = 2);
/// "9.7 ± 2.8" in millimeters.
std::string format_mean_std_mm(const Stat& s, int decimals = 1);

void write_report(std::ostream& os, const MetricsReport& report);
void write_summary(std::ostream& os, const AggregateSummary& summary);
/// Per-frame error curves: frame,ex,ey,ez,error,rot_error.
void write_error_curves(std::ostream& os, const Trajectory& est, const Trajectory& gt);

}  // namespace toolpose
