#include "dpmhm/log_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace dpmhm {

std::string format9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

namespace {

// Reads the header and then hands each data row, split on commas, to `row`.
template <typename F>
void read_csv(std::istream& is, const char* header, std::size_t columns, F row) {
  std::string line;
  int line_no = 0;
  if (!std::getline(is, line)) throw LogFormatError("empty log", 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw LogFormatError("expected header '" + std::string(header) + "'", line_no);
  std::vector<std::string> fields;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fields.clear();
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != columns)
      throw LogFormatError("expected " + std::to_string(columns) + " fields, got " + std::to_string(fields.size()),
                           line_no);
    row(fields, line_no);
  }
}

double to_double(const std::string& s, int line) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
    throw LogFormatError("invalid number '" + s + "'", line);
  return v;
}

int to_int(const std::string& s, int line) {
  int v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw LogFormatError("invalid integer '" + s + "'", line);
  return v;
}

Eigen::Quaterniond to_quat(const std::vector<std::string>& f, std::size_t at, int line) {
  Eigen::Quaterniond q(to_double(f[at], line), to_double(f[at + 1], line), to_double(f[at + 2], line),
                       to_double(f[at + 3], line));
  const double n = q.norm();
  if (std::abs(n - 1.0) > 1e-6) throw LogFormatError("quaternion is not unit length", line);
  return q.normalized();
}

void write_pose_fields(std::ostream& os, const Pose& p) {
  const Eigen::Quaterniond& q = p.rotation;
  os << format9(p.translation.x()) << ',' << format9(p.translation.y()) << ',' << format9(p.translation.z()) << ','
     << format9(q.w()) << ',' << format9(q.x()) << ',' << format9(q.y()) << ',' << format9(q.z());
}

std::vector<TimedPose> read_timed_poses(std::istream& is, const char* header) {
  std::vector<TimedPose> out;
  read_csv(is, header, 8, [&](const std::vector<std::string>& f, int line) {
    TimedPose tp;
    tp.t = to_double(f[0], line);
    if (!out.empty() && tp.t < out.back().t) throw LogFormatError("time decreases", line);
    tp.pose.translation = Vec3(to_double(f[1], line), to_double(f[2], line), to_double(f[3], line));
    tp.pose.rotation = to_quat(f, 4, line);
    out.push_back(tp);
  });
  if (out.empty()) throw LogFormatError("log has no rows", 2);
  return out;
}

}  // namespace

void write_measurements(std::ostream& os, std::span<const SemanticMeasurement> ms) {
  os << kMeasurementHeader << '\n';
  for (const auto& m : ms)
    os << format9(m.time) << ',' << m.scene_id << ',' << m.label.id << ',' << format9(m.position.x()) << ','
       << format9(m.position.y()) << ',' << format9(m.position.z()) << '\n';
}

std::vector<SemanticMeasurement> read_measurements(std::istream& is) {
  std::vector<SemanticMeasurement> out;
  read_csv(is, kMeasurementHeader, 6, [&](const std::vector<std::string>& f, int line) {
    SemanticMeasurement m;
    m.time = to_double(f[0], line);
    m.scene_id = to_int(f[1], line);
    m.label = ClassLabel{to_int(f[2], line)};
    if (m.scene_id < 0 || m.label.id < 0) throw LogFormatError("ids must be non-negative", line);
    m.position = Vec3(to_double(f[3], line), to_double(f[4], line), to_double(f[5], line));
    if (!out.empty() && (m.time < out.back().time || m.scene_id < out.back().scene_id))
      throw LogFormatError("time or scene id decreases", line);
    out.push_back(m);
  });
  return out;
}

void write_odometry(std::ostream& os, std::span<const TimedPose> increments) {
  os << kOdometryHeader << '\n';
  for (const auto& tp : increments) {
    os << format9(tp.t) << ',';
    write_pose_fields(os, tp.pose);
    os << '\n';
  }
}

std::vector<TimedPose> read_odometry(std::istream& is) { return read_timed_poses(is, kOdometryHeader); }

void write_poses(std::ostream& os, std::span<const TimedPose> poses) {
  os << kPoseHeader << '\n';
  for (const auto& tp : poses) {
    os << format9(tp.t) << ',';
    write_pose_fields(os, tp.pose);
    os << '\n';
  }
}

std::vector<TimedPose> read_poses(std::istream& is) { return read_timed_poses(is, kPoseHeader); }

void write_map(std::ostream& os, std::span<const Landmark> landmarks) {
  os << kMapHeader << '\n';
  for (const auto& lm : landmarks) {
    os << lm.id << ',' << lm.label.id << ',' << format9(lm.mean.x()) << ',' << format9(lm.mean.y()) << ','
       << format9(lm.mean.z());
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) os << ',' << format9(lm.cov(r, c));
    os << '\n';
  }
}

std::vector<Landmark> read_map(std::istream& is) {
  std::vector<Landmark> out;
  read_csv(is, kMapHeader, 14, [&](const std::vector<std::string>& f, int line) {
    Landmark lm;
    lm.id = to_int(f[0], line);
    lm.label = ClassLabel{to_int(f[1], line)};
    lm.mean = Vec3(to_double(f[2], line), to_double(f[3], line), to_double(f[4], line));
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) lm.cov(r, c) = to_double(f[static_cast<std::size_t>(5 + 3 * r + c)], line);
    out.push_back(lm);
  });
  return out;
}

void write_metrics(std::ostream& os, std::span<const MetricsRow> rows) {
  os << kMetricsHeader << '\n';
  for (const auto& r : rows)
    os << r.frame << ',' << (std::isnan(r.rmse) ? std::string("nan") : format9(r.rmse)) << ',' << r.n_hypotheses << ','
       << r.n_landmarks << ',' << r.n_loop_closures << '\n';
}

std::vector<MetricsRow> read_metrics(std::istream& is) {
  std::vector<MetricsRow> out;
  read_csv(is, kMetricsHeader, 5, [&](const std::vector<std::string>& f, int line) {
    MetricsRow r;
    r.frame = to_int(f[0], line);
    r.rmse = f[1] == "nan" ? std::nan("") : to_double(f[1], line);
    r.n_hypotheses = to_int(f[2], line);
    r.n_landmarks = to_int(f[3], line);
    r.n_loop_closures = to_int(f[4], line);
    out.push_back(r);
  });
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace dpmhm
