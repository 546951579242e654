#pragma once

// EuRoC-style dataset ingestion: CSV parsing with integer-nanosecond
// timestamps, truth interpolation, virtual landmark placement and replay
// assembly. Timestamps stay in nanoseconds until values cross into the
// filter math, which runs in seconds.

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "navfilter/errors.hpp"
#include "navfilter/measurement.hpp"
#include "navfilter/rng.hpp"
#include "navfilter/se23.hpp"

namespace navfilter {

struct RawImuRecord {
  std::int64_t t_ns = 0;
  Vec3 omega = Vec3::Zero();
  Vec3 accel = Vec3::Zero();
};

struct GroundTruthRecord {
  std::int64_t t_ns = 0;
  Vec3 pos = Vec3::Zero();
  UnitQuaternion q;
  Vec3 vel = Vec3::Zero();
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::int64_t field_to_ns(const std::string& s, long line_no) {
  const char* begin = s.c_str();
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(begin, &end, 10);
  if (end == begin || *end != '\0' || errno == ERANGE)
    throw ParseError("bad timestamp '" + s + "'", line_no);
  return v;
}

inline double field_to_double(const std::string& s, long line_no) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(v))
    throw ParseError("bad number '" + s + "'", line_no);
  return v;
}

// Yields data rows with their 1-based line numbers; comment and blank lines
// are skipped, CRLF endings tolerated.
template <class RowFn>
void for_each_csv_row(const std::string& path, RowFn fn) {
  std::ifstream in(path);
  if (!in.good()) throw FileNotFound(path);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    fn(line, line_no);
  }
}

}  // namespace detail

inline std::vector<RawImuRecord> parse_imu_csv(const std::string& path) {
  std::vector<RawImuRecord> recs;
  detail::for_each_csv_row(path, [&](const std::string& line, long line_no) {
    const auto f = detail::split_csv(line);
    if (f.size() != 7)
      throw ParseError("expected 7 fields, got " + std::to_string(f.size()), line_no);
    RawImuRecord r;
    r.t_ns = detail::field_to_ns(f[0], line_no);
    for (int i = 0; i < 3; ++i) r.omega(i) = detail::field_to_double(f[1 + i], line_no);
    for (int i = 0; i < 3; ++i) r.accel(i) = detail::field_to_double(f[4 + i], line_no);
    if (!recs.empty() && r.t_ns <= recs.back().t_ns)
      throw ParseError("timestamps must be strictly increasing", line_no);
    recs.push_back(r);
  });
  return recs;
}

inline std::vector<GroundTruthRecord> parse_groundtruth_csv(const std::string& path) {
  std::vector<GroundTruthRecord> recs;
  detail::for_each_csv_row(path, [&](const std::string& line, long line_no) {
    const auto f = detail::split_csv(line);
    // Full EuRoC state files append bias estimates; anything past the
    // velocity block is ignored.
    if (f.size() < 11)
      throw ParseError("expected at least 11 fields, got " + std::to_string(f.size()), line_no);
    GroundTruthRecord r;
    r.t_ns = detail::field_to_ns(f[0], line_no);
    for (int i = 0; i < 3; ++i) r.pos(i) = detail::field_to_double(f[1 + i], line_no);
    UnitQuaternion q;
    q.w = detail::field_to_double(f[4], line_no);
    for (int i = 0; i < 3; ++i) q.xyz(i) = detail::field_to_double(f[5 + i], line_no);
    for (int i = 0; i < 3; ++i) r.vel(i) = detail::field_to_double(f[8 + i], line_no);
    if (std::abs(q.norm() - 1.0) > 1e-2)
      throw ParseError("quaternion norm " + std::to_string(q.norm()) + " too far from unit",
                       line_no);
    r.q = q.normalized();
    if (!recs.empty() && r.t_ns <= recs.back().t_ns)
      throw ParseError("timestamps must be strictly increasing", line_no);
    recs.push_back(r);
  });
  return recs;
}

// Pose and velocity at an arbitrary instant inside the record span: linear
// in position and velocity, great-circle in orientation.
inline NavState interpolate_truth(const std::vector<GroundTruthRecord>& recs, std::int64_t t_ns) {
  if (recs.empty() || t_ns < recs.front().t_ns || t_ns > recs.back().t_ns)
    throw InvalidState("interpolation instant outside ground-truth span");
  const auto it = std::upper_bound(
      recs.begin(), recs.end(), t_ns,
      [](std::int64_t t, const GroundTruthRecord& r) { return t < r.t_ns; });
  NavState x;
  if (it == recs.begin()) {
    x.rot = quat_to_rot(recs.front().q);
    x.pos = recs.front().pos;
    x.vel = recs.front().vel;
    return x;
  }
  const GroundTruthRecord& b = (it == recs.end()) ? recs.back() : *it;
  const GroundTruthRecord& a = (it == recs.end()) ? recs.back() : *(it - 1);
  if (a.t_ns == b.t_ns) {
    x.rot = quat_to_rot(a.q);
    x.pos = a.pos;
    x.vel = a.vel;
    return x;
  }
  const double u = static_cast<double>(t_ns - a.t_ns) / static_cast<double>(b.t_ns - a.t_ns);
  x.rot = quat_to_rot(slerp(a.q, b.q, u));
  x.pos = (1.0 - u) * a.pos + u * b.pos;
  x.vel = (1.0 - u) * a.vel + u * b.vel;
  return x;
}

// Draws landmarks uniformly inside the trajectory's bounding box inflated by
// margin, redrawing the whole set until it spans a plane. Deterministic for
// a given seed.
inline std::vector<Landmark> generate_virtual_landmarks(const std::vector<NavState>& truth, int n,
                                                        double margin, std::uint64_t seed) {
  if (n < 3) throw ConfigError("landmark count must be at least 3");
  if (margin < 0.0) throw ConfigError("landmark margin must be nonnegative");
  if (truth.empty()) throw DegenerateTrajectory("no trajectory to place landmarks around");

  Vec3 lo = truth.front().pos, hi = truth.front().pos;
  for (const auto& x : truth) {
    lo = lo.cwiseMin(x.pos);
    hi = hi.cwiseMax(x.pos);
  }
  lo -= Vec3::Constant(margin);
  hi += Vec3::Constant(margin);

  int spread_axes = 0;
  for (int i = 0; i < 3; ++i) spread_axes += (hi(i) - lo(i)) > 1e-9 ? 1 : 0;
  if (spread_axes < 2)
    throw DegenerateTrajectory("inflated bounding box has no area to span a plane");

  Rng rng(seed);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<Landmark> lms;
    lms.reserve(n);
    for (int i = 0; i < n; ++i) lms.push_back({i, rng.uniform_vec3(lo, hi), 1.0});
    if (check_noncollinear(lms)) return lms;
  }
  throw DegenerateTrajectory("could not draw a non-collinear landmark set");
}

// Everything a replay run needs: pass-through IMU, truth aligned to the IMU
// stamps, virtual landmarks, and noise-free-or-noisy bundles synthesized
// from interpolated truth on the camera grid.
struct ReplayDataset {
  std::vector<ImuSample> imu;
  std::vector<TimedState> truth;
  std::vector<Landmark> landmarks;
  std::vector<ObservationFrame> bundles;
};

inline ReplayDataset build_replay(const std::string& imu_path, const std::string& gt_path,
                                  int n_landmarks, int cam_rate, const ObservationNoise& obs_noise,
                                  std::uint64_t seed, double margin = 1.0) {
  if (cam_rate <= 0) throw ConfigError("camera rate must be positive");
  const auto imu = parse_imu_csv(imu_path);
  const auto gt = parse_groundtruth_csv(gt_path);
  if (imu.empty() || gt.empty())
    throw NoTimeOverlap("empty stream: imu has " + std::to_string(imu.size()) + " records, truth " +
                        std::to_string(gt.size()));
  const std::int64_t start = std::max(imu.front().t_ns, gt.front().t_ns);
  const std::int64_t end = std::min(imu.back().t_ns, gt.back().t_ns);
  if (start >= end)
    throw NoTimeOverlap("imu and ground-truth time ranges do not intersect");

  std::vector<NavState> states;
  states.reserve(gt.size());
  for (const auto& r : gt) {
    NavState x;
    x.rot = quat_to_rot(r.q);
    x.pos = r.pos;
    x.vel = r.vel;
    states.push_back(x);
  }

  ReplayDataset ds;
  ds.landmarks = generate_virtual_landmarks(states, n_landmarks, margin, seed);

  for (const auto& r : imu) {
    if (r.t_ns < start || r.t_ns > end) continue;
    ds.imu.push_back({r.t_ns * 1e-9, r.omega, r.accel});
    ds.truth.push_back({r.t_ns * 1e-9, interpolate_truth(gt, r.t_ns)});
  }

  Rng rng(seed + 1);
  const std::int64_t step_ns = std::llround(1e9 / cam_rate);
  for (std::int64_t t = start + step_ns; t <= end; t += step_ns) {
    const NavState x = interpolate_truth(gt, t);
    ObservationFrame f;
    f.t = t * 1e-9;
    f.obs.reserve(ds.landmarks.size());
    for (const auto& lm : ds.landmarks)
      f.obs.push_back(synthesize_observation(lm, x, obs_noise, rng, f.t));
    ds.bundles.push_back(std::move(f));
  }
  return ds;
}

}  // namespace navfilter
