#include "toolpose/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include "toolpose/errors.hpp"

namespace toolpose {

namespace {

void check_pair(const Trajectory& est, const Trajectory& gt) {
    if (est.records.empty() || gt.records.empty()) {
        throw Error(ErrorCode::EmptyInput, "trajectories must contain at least one record");
    }
    if (est.size() != gt.size()) {
        std::ostringstream os;
        os << "estimate has " << est.size() << " records, ground truth has " << gt.size();
        throw Error(ErrorCode::LengthMismatch, os.str());
    }
    for (std::size_t i = 0; i < est.size(); ++i) {
        if (est.records[i].frame != gt.records[i].frame) {
            std::ostringstream os;
            os << "record " << i << ": estimate frame " << est.records[i].frame << " vs ground truth frame "
               << gt.records[i].frame;
            throw Error(ErrorCode::IndexMismatch, os.str());
        }
    }
}

Vec3 offset(const Trajectory& est, const Trajectory& gt, std::size_t i) {
    return est.records[i].pose.translation - gt.records[i].pose.translation;
}

Stat stat_of(const std::vector<double>& xs) {
    Stat s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(var / static_cast<double>(xs.size()));
    return s;
}

}  // namespace

double ade(const Trajectory& est, const Trajectory& gt) {
    check_pair(est, gt);
    double sum = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) sum += offset(est, gt, i).norm();
    return sum / static_cast<double>(est.size());
}

double fde(const Trajectory& est, const Trajectory& gt) {
    check_pair(est, gt);
    return offset(est, gt, est.size() - 1).norm();
}

AxisError per_axis_error(const Trajectory& est, const Trajectory& gt) {
    check_pair(est, gt);
    const double n = static_cast<double>(est.size());
    AxisError e;
    for (std::size_t i = 0; i < est.size(); ++i) e.mean += offset(est, gt, i);
    e.mean /= n;
    Vec3 var = Vec3::Zero();
    for (std::size_t i = 0; i < est.size(); ++i) {
        const Vec3 d = offset(est, gt, i) - e.mean;
        var += d.cwiseProduct(d);
    }
    e.std = (var / n).cwiseSqrt();
    return e;
}

MetricsReport evaluate(const Trajectory& est, const Trajectory& gt) {
    MetricsReport r;
    r.ade = ade(est, gt);
    r.fde = fde(est, gt);
    const AxisError axis = per_axis_error(est, gt);
    r.mean_error_xyz = axis.mean;
    r.std_error_xyz = axis.std;
    for (std::size_t i = 0; i < est.size(); ++i) {
        r.per_frame_errors.push_back(offset(est, gt, i).norm());
        const double rot = rotation_distance(est.records[i].pose.rotation, gt.records[i].pose.rotation);
        r.per_frame_rotation_errors.push_back(rot);
        r.mean_rotation_error += rot;
        r.mean_joint_abs_error += (est.records[i].q - gt.records[i].q).cwiseAbs();
    }
    r.mean_rotation_error /= static_cast<double>(est.size());
    r.mean_joint_abs_error /= static_cast<double>(est.size());
    return r;
}

AggregateSummary aggregate_reports(std::span<const MetricsReport> reports) {
    if (reports.empty()) {
        throw Error(ErrorCode::EmptyInput, "aggregate_reports needs at least one report");
    }
    auto collect = [&](auto field) {
        std::vector<double> xs;
        xs.reserve(reports.size());
        for (const MetricsReport& r : reports) xs.push_back(field(r));
        return stat_of(xs);
    };
    AggregateSummary s;
    s.count = reports.size();
    s.ade = collect([](const MetricsReport& r) { return r.ade; });
    s.fde = collect([](const MetricsReport& r) { return r.fde; });
    for (int a = 0; a < 3; ++a) {
        s.mean_error_xyz[a] = collect([a](const MetricsReport& r) { return r.mean_error_xyz[a]; });
        s.std_error_xyz[a] = collect([a](const MetricsReport& r) { return r.std_error_xyz[a]; });
    }
    s.rotation_error = collect([](const MetricsReport& r) { return r.mean_rotation_error; });
    return s;
}

std::string format_vector_mm(const Vec3& v, int decimals) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(decimals) << '[';
    for (int i = 0; i < 3; ++i) {
        // Keep "-0.00" from appearing for values that round to zero.
        double mm = v[i] * 1000.0;
        const double unit = std::pow(10.0, -decimals);
        if (std::abs(mm) < 0.5 * unit) mm = 0.0;
        os << (i ? ", " : "") << mm;
    }
    os << ']';
    return os.str();
}

std::string format_mean_std_mm(const Stat& s, int decimals) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(decimals) << s.mean * 1000.0 << " ± " << s.std * 1000.0;
    return os.str();
}

void write_report(std::ostream& os, const MetricsReport& r) {
    os << "# Trajectory metrics (translation, millimeters; std is population over frames)\n";
    os << "Frames           " << r.per_frame_errors.size() << '\n';
    os << "ADE              " << std::fixed << std::setprecision(3) << r.ade * 1000.0 << '\n';
    os << "FDE              " << r.fde * 1000.0 << '\n';
    os << "Mean Error (x, y, z)  " << format_vector_mm(r.mean_error_xyz) << '\n';
    os << "Std Error (x, y, z)   " << format_vector_mm(r.std_error_xyz) << '\n';
    os << "# Diagnostics\n";
    os << "Mean rotation error (deg)  " << std::setprecision(3) << r.mean_rotation_error * 180.0 / std::numbers::pi << '\n';
    os << "Mean |joint error| (rad)   [" << std::setprecision(4) << r.mean_joint_abs_error[0] << ", "
       << r.mean_joint_abs_error[1] << ", " << r.mean_joint_abs_error[2] << "]\n";
    os.unsetf(std::ios::floatfield);
}

void write_summary(std::ostream& os, const AggregateSummary& s) {
    os << "# Aggregate over " << s.count << " trajectories (millimeters, mean ± population std)\n";
    os << "Average ADE      " << format_mean_std_mm(s.ade) << '\n';
    os << "Average FDE      " << format_mean_std_mm(s.fde) << '\n';
    const Vec3 mean_of_mean(s.mean_error_xyz[0].mean, s.mean_error_xyz[1].mean, s.mean_error_xyz[2].mean);
    const Vec3 std_of_mean(s.mean_error_xyz[0].std, s.mean_error_xyz[1].std, s.mean_error_xyz[2].std);
    const Vec3 mean_of_std(s.std_error_xyz[0].mean, s.std_error_xyz[1].mean, s.std_error_xyz[2].mean);
    os << "Mean Error (x, y, z)                    " << format_vector_mm(mean_of_mean) << '\n';
    os << "Std Error across trajectories (x, y, z) " << format_vector_mm(std_of_mean) << '\n';
    os << "Std Error across frames, mean (x, y, z) " << format_vector_mm(mean_of_std) << '\n';
    os << "Mean rotation error (deg)  " << std::fixed << std::setprecision(2)
       << s.rotation_error.mean * 180.0 / std::numbers::pi << " ± " << s.rotation_error.std * 180.0 / std::numbers::pi << '\n';
    os.unsetf(std::ios::floatfield);
}

void write_error_curves(std::ostream& os, const Trajectory& est, const Trajectory& gt) {
    check_pair(est, gt);
    os << "frame,ex,ey,ez,error,rot_error\n";
    for (std::size_t i = 0; i < est.size(); ++i) {
        const Vec3 d = offset(est, gt, i);
        os << est.records[i].frame << ',' << format_real(d.x()) << ',' << format_real(d.y()) << ','
           << format_real(d.z()) << ',' << format_real(d.norm()) << ','
           << format_real(rotation_distance(est.records[i].pose.rotation, gt.records[i].pose.rotation)) << '\n';
    }
}

}  // namespace toolpose
