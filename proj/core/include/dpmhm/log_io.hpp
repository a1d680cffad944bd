#pragma once

#include "dpmhm/types.hpp"

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpmhm {

/// Malformed log content. The message names the offending line.
class LogFormatError : public std::runtime_error {
 public:
  LogFormatError(const std::string& what, int line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  [[nodiscard]] int line() const { return line_; }

 private:
  int line_;
};

inline constexpr const char* kMeasurementHeader = "t,scene_id,class_id,x,y,z";
inline constexpr const char* kOdometryHeader = "t,dx,dy,dz,dqw,dqx,dqy,dqz";
inline constexpr const char* kPoseHeader = "t,x,y,z,qw,qx,qy,qz";
inline constexpr const char* kMapHeader =
    "landmark_id,class_id,x,y,z,cov_xx,cov_xy,cov_xz,cov_yx,cov_yy,cov_yz,cov_zx,cov_zy,cov_zz";
inline constexpr const char* kMetricsHeader = "frame,rmse,n_hypotheses,n_landmarks,n_loop_closures";

/// `%.9g`.
std::string format9(double v);

struct TimedPose {
  double t = 0.0;
  Pose pose;
};

struct MetricsRow {
  int frame = 0;
  double rmse = 0.0;
  int n_hypotheses = 0;
  int n_landmarks = 0;
  int n_loop_closures = 0;
};

void write_measurements(std::ostream& os, std::span<const SemanticMeasurement> ms);
/// Rejects a missing header, wrong column counts, unparsable fields and decreasing time.
std::vector<SemanticMeasurement> read_measurements(std::istream& is);

/// Relative increments, one per scene.
void write_odometry(std::ostream& os, std::span<const TimedPose> increments);
std::vector<TimedPose> read_odometry(std::istream& is);

/// Ground truth and trajectory outputs share this schema.
void write_poses(std::ostream& os, std::span<const TimedPose> poses);
std::vector<TimedPose> read_poses(std::istream& is);

void write_map(std::ostream& os, std::span<const Landmark> landmarks);
std::vector<Landmark> read_map(std::istream& is);

void write_metrics(std::ostream& os, std::span<const MetricsRow> rows);
std::vector<MetricsRow> read_metrics(std::istream& is);

/// Whole-file helpers; binary mode keeps LF line endings.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace dpmhm
