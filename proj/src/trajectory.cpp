#include "toolpose/trajectory.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "toolpose/errors.hpp"

namespace toolpose {

void Trajectory::validate() const {
    if (records.empty()) {
        throw Error(ErrorCode::InvalidArgument, "trajectory has no records");
    }
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].frame <= records[i - 1].frame) {
            throw Error(ErrorCode::InvalidArgument, "frame indices must strictly increase");
        }
    }
}

std::string format_real(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

void write_trajectory(std::ostream& os, const Trajectory& traj) {
    os << kTrajectoryHeader << '\n';
    for (const TrajectoryRecord& r : traj.records) {
        os << r.frame;
        const Mat3& m = r.pose.rotation.matrix();
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) os << ',' << format_real(m(i, j));
        }
        for (int i = 0; i < 3; ++i) os << ',' << format_real(r.pose.translation[i]);
        for (int i = 0; i < 3; ++i) os << ',' << format_real(r.q[i]);
        os << ',';
        if (r.loss) os << format_real(*r.loss);
        os << '\n';
    }
}

namespace {

[[noreturn]] void parse_error(const std::string& source, std::size_t line, const std::string& what) {
    std::ostringstream os;
    os << source << ":" << line << ": " << what;
    throw Error(ErrorCode::ParseError, os.str());
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
    const char* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, out);
    return res.ec == std::errc() && res.ptr == end;
}

}  // namespace

Trajectory read_trajectory(std::istream& is, const std::string& source) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(is, line)) {
        parse_error(source, 1, "empty file (expected header and at least one record)");
    }
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTrajectoryHeader) {
        parse_error(source, line_no, "unexpected header");
    }
    Trajectory traj;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto f = split_csv(line);
        if (f.size() != 17) {
            std::ostringstream os;
            os << "expected 17 fields, found " << f.size();
            parse_error(source, line_no, os.str());
        }
        TrajectoryRecord r;
        if (!parse_number(f[0], r.frame)) parse_error(source, line_no, "bad frame index '" + f[0] + "'");
        std::array<double, 15> v{};
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!parse_number(f[i + 1], v[i])) {
                parse_error(source, line_no, "bad number '" + f[i + 1] + "'");
            }
        }
        Mat4 m = Mat4::Identity();
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) m(i, j) = v[static_cast<std::size_t>(i * 3 + j)];
            m(i, 3) = v[static_cast<std::size_t>(9 + i)];
        }
        try {
            r.pose = Pose::from_matrix(m, 1e-6);
        } catch (const Error& e) {
            parse_error(source, line_no, e.what());
        }
        r.q = JointVector(v[12], v[13], v[14]);
        if (!f[16].empty()) {
            double loss = 0.0;
            if (!parse_number(f[16], loss)) parse_error(source, line_no, "bad loss '" + f[16] + "'");
            r.loss = loss;
        }
        if (!traj.records.empty() && r.frame <= traj.records.back().frame) {
            parse_error(source, line_no, "frame index does not increase");
        }
        traj.records.push_back(r);
    }
    if (traj.records.empty()) {
        parse_error(source, line_no, "no records (a trajectory needs at least one)");
    }
    return traj;
}

void save_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
    std::ofstream os(path);
    if (!os) {
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }
    write_trajectory(os, traj);
    if (!os) {
        throw Error(ErrorCode::IoError, "short write to " + path.string());
    }
}

Trajectory load_trajectory(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw Error(ErrorCode::IoError, "cannot read " + path.string());
    }
    return read_trajectory(is, path.string());
}

}  // namespace toolpose
