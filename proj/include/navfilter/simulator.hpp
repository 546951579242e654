#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "navfilter/errors.hpp"
#include "navfilter/measurement.hpp"
#include "navfilter/rng.hpp"
#include "navfilter/se23.hpp"

namespace navfilter {

// Scripted body-frame input program. The functions give angular rate and
// non-gravitational specific force; duration and dt shape the emitted grid.
struct TrajectoryProfile {
  std::string name;
  std::function<Vec3(double)> omega_fn;
  std::function<Vec3(double)> accel_fn;
  double duration = 30.0;
  double dt = 0.005;

  void validate() const {
    if (!omega_fn || !accel_fn) throw ConfigError("profile input functions must be set");
    if (!(dt > 0.0)) throw ConfigError("profile dt must be positive");
    if (!(duration >= dt)) throw ConfigError("profile duration must cover at least one step");
  }
};

// A profile plus the start state that makes it fly the advertised shape.
struct ProfileSetup {
  TrajectoryProfile profile;
  NavState x0;
};

inline ProfileSetup builtin_profile(const std::string& name,
                                    const Vec3& gravity = Vec3(0.0, 0.0, -9.81)) {
  ProfileSetup s;
  s.profile.name = name;
  if (name == "hover") {
    s.profile.omega_fn = [](double) { return Vec3::Zero(); };
    s.profile.accel_fn = [gravity](double) { return Vec3(-gravity); };
    return s;
  }
  if (name == "line") {
    s.x0.pos = Vec3(0.0, 0.0, 1.0);
    s.x0.vel = Vec3(1.2, 0.4, 0.0);
    s.profile.omega_fn = [](double) { return Vec3::Zero(); };
    s.profile.accel_fn = [gravity](double) { return Vec3(-gravity); };
    return s;
  }
  if (name == "circle") {
    const double yaw_rate = 0.8;
    const Vec3 omega(0.0, 0.0, yaw_rate);
    const Vec3 v_body(1.6, 0.0, 0.0);
    s.x0.pos = Vec3(2.2, 1.0, 1.0);
    s.x0.vel = v_body;
    s.profile.omega_fn = [omega](double) { return omega; };
    s.profile.accel_fn = [omega, v_body, gravity](double t) {
      const Mat3 rot = so3_exp(Vec3(0.0, 0.0, 0.8 * t));
      return Vec3(omega.cross(v_body) - rot.transpose() * gravity);
    };
    return s;
  }
  if (name == "eight") {
    const double amp = 2.0;
    const double nu = 2.0 * M_PI / 8.0;
    const Vec3 v_body(1.6, 0.0, 0.0);
    s.x0.pos = Vec3(0.0, 0.0, 1.5);
    s.x0.vel = v_body;
    s.profile.omega_fn = [amp, nu](double t) {
      return Vec3(0.0, 0.0, amp * nu * std::cos(nu * t));
    };
    s.profile.accel_fn = [amp, nu, v_body, gravity](double t) {
      const Vec3 omega(0.0, 0.0, amp * nu * std::cos(nu * t));
      const Mat3 rot = so3_exp(Vec3(0.0, 0.0, amp * std::sin(nu * t)));
      return Vec3(omega.cross(v_body) - rot.transpose() * gravity);
    };
    return s;
  }
  throw ConfigError("unknown profile '" + name + "' (expected hover, line, circle or eight)");
}

// One exact discrete step of the true dynamics for piecewise-constant body
// inputs: the strapdown factor on the right, the gravity factor on the left.
// The strapdown frame is kept because feature bundles are synthesized from
// it (the gravity factor is common mode between truth and filter).
struct TruthStep {
  NavState next;
  NavState strapdown;
};

inline TruthStep advance_truth(const NavState& x, const Vec3& omega, const Vec3& accel,
                               const Vec3& gravity, double dt) {
  TangentElement u;
  u.omega = omega;
  u.a = accel;
  u.kappa = 1.0;
  TangentElement antigravity;
  antigravity.a = -gravity;
  antigravity.kappa = 1.0;

  const Mat5 mid = x.as_matrix() * se23_exp(u, dt);
  const Mat5 nxt = se23_exp(antigravity, -dt) * mid;

  TruthStep s;
  s.strapdown.rot = mid.block<3, 3>(0, 0);
  s.strapdown.pos = mid.block<3, 1>(0, 3);
  s.strapdown.vel = mid.block<3, 1>(0, 4);
  s.next.rot = nxt.block<3, 3>(0, 0);
  s.next.pos = nxt.block<3, 1>(0, 3);
  s.next.vel = nxt.block<3, 1>(0, 4);
  return s;
}

// Advances the profile on a uniform grid, sampling the inputs at window
// midpoints. Returns duration/dt + 1 states including x0.
inline std::vector<NavState> integrate_truth(const TrajectoryProfile& profile, const NavState& x0,
                                             const Vec3& gravity) {
  profile.validate();
  const int n = static_cast<int>(std::llround(profile.duration / profile.dt));
  std::vector<NavState> xs;
  xs.reserve(n + 1);
  xs.push_back(x0);
  for (int k = 0; k < n; ++k) {
    const double tm = (k + 0.5) * profile.dt;
    xs.push_back(
        advance_truth(xs.back(), profile.omega_fn(tm), profile.accel_fn(tm), gravity, profile.dt)
            .next);
  }
  return xs;
}

// Constant additive biases plus optional white noise on both IMU channels.
struct ImuCorruption {
  Vec3 b_omega = Vec3::Zero();
  Vec3 b_a = Vec3::Zero();
  double sigma_omega = 0.0;
  double sigma_a = 0.0;

  void validate() const {
    if (sigma_omega < 0.0 || sigma_a < 0.0) throw ConfigError("noise std must be nonnegative");
  }
};

inline ImuSample corrupt_imu(const Vec3& omega, const Vec3& accel, double t,
                             const ImuCorruption& c, Rng& rng) {
  c.validate();
  ImuSample s;
  s.t = t;
  s.omega = omega + c.b_omega;
  s.accel = accel + c.b_a;
  if (c.sigma_omega > 0.0) s.omega += rng.gaussian_vec3(c.sigma_omega);
  if (c.sigma_a > 0.0) s.accel += rng.gaussian_vec3(c.sigma_a);
  return s;
}

inline ImuSample corrupt_imu(const Vec3& omega, const Vec3& accel, double t,
                             const ImuCorruption& c, std::uint64_t seed) {
  Rng rng(seed);
  return corrupt_imu(omega, accel, t, c, rng);
}

struct SimulatedStreams {
  std::vector<ImuSample> imu;
  std::vector<ObservationFrame> frames;
  std::vector<TimedState> truth;
};

// Generates synchronized IMU, feature and truth streams. The grid spacing
// comes from imu_rate (profile.dt is only advisory here); camera frames land
// every imu_rate/cam_rate-th step and observe the strapdown frame of the
// step they close.
inline SimulatedStreams emit_streams(const TrajectoryProfile& profile,
                                     const std::vector<Landmark>& lms, const ImuCorruption& c,
                                     const ObservationNoise& obs_noise, int imu_rate, int cam_rate,
                                     std::uint64_t seed, const NavState& x0 = NavState{},
                                     const Vec3& gravity = Vec3(0.0, 0.0, -9.81)) {
  if (imu_rate <= 0 || cam_rate <= 0) throw ConfigError("sample rates must be positive");
  if (imu_rate % cam_rate != 0)
    throw RateMismatch("imu rate " + std::to_string(imu_rate) + " is not a multiple of camera rate " +
                       std::to_string(cam_rate));
  c.validate();

  TrajectoryProfile run = profile;
  run.dt = 1.0 / imu_rate;
  run.validate();
  const int stride = imu_rate / cam_rate;
  const int n = static_cast<int>(std::llround(run.duration * imu_rate));

  Rng rng(seed);
  SimulatedStreams out;
  out.imu.reserve(n);
  out.truth.reserve(n + 1);
  out.frames.reserve(n / stride + 1);

  NavState x = x0;
  out.truth.push_back({0.0, x});
  for (int k = 0; k < n; ++k) {
    const double t0 = k * run.dt;
    const double t1 = (k + 1) * run.dt;
    const Vec3 omega = run.omega_fn(t0 + 0.5 * run.dt);
    const Vec3 accel = run.accel_fn(t0 + 0.5 * run.dt);
    out.imu.push_back(corrupt_imu(omega, accel, t0, c, rng));

    const TruthStep s = advance_truth(x, omega, accel, gravity, run.dt);
    x = s.next;
    out.truth.push_back({t1, x});

    if ((k + 1) % stride == 0) {
      ObservationFrame f;
      f.t = t1;
      f.obs.reserve(lms.size());
      for (const auto& lm : lms)
        f.obs.push_back(synthesize_observation(lm, s.strapdown, obs_noise, rng, t1));
      out.frames.push_back(std::move(f));
    }
  }
  return out;
}

namespace detail {

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : f_(std::fopen(path.c_str(), "w")) {
    if (!f_) throw FileNotFound(path);
  }
  ~CsvWriter() {
    if (f_) std::fclose(f_);
  }
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void line(const std::string& text) { std::fprintf(f_, "%s\n", text.c_str()); }

  void row(long long ns, const double* v, int count) {
    std::fprintf(f_, "%lld", ns);
    for (int i = 0; i < count; ++i) std::fprintf(f_, ",%.17g", v[i]);
    std::fputc('\n', f_);
  }

  void row(const double* v, int count) {
    for (int i = 0; i < count; ++i) std::fprintf(f_, i ? ",%.17g" : "%.17g", v[i]);
    std::fputc('\n', f_);
  }

 private:
  std::FILE* f_;
};

inline long long to_ns(double t) { return std::llround(t * 1e9); }

}  // namespace detail

inline void write_imu_csv(const std::string& path, const std::vector<ImuSample>& imu) {
  detail::CsvWriter w(path);
  w.line(
      "#timestamp [ns],w_RS_S_x [rad s^-1],w_RS_S_y [rad s^-1],w_RS_S_z [rad s^-1],"
      "a_RS_S_x [m s^-2],a_RS_S_y [m s^-2],a_RS_S_z [m s^-2]");
  for (const auto& s : imu) {
    const double v[6] = {s.omega.x(), s.omega.y(), s.omega.z(),
                         s.accel.x(), s.accel.y(), s.accel.z()};
    w.row(detail::to_ns(s.t), v, 6);
  }
}

inline void write_groundtruth_csv(const std::string& path, const std::vector<TimedState>& truth) {
  detail::CsvWriter w(path);
  w.line(
      "#timestamp [ns],p_RS_R_x [m],p_RS_R_y [m],p_RS_R_z [m],"
      "q_RS_w [],q_RS_x [],q_RS_y [],q_RS_z [],"
      "v_RS_R_x [m s^-1],v_RS_R_y [m s^-1],v_RS_R_z [m s^-1]");
  for (const auto& ts : truth) {
    const UnitQuaternion q = quat_from_rot(ts.x.rot);
    const double v[10] = {ts.x.pos.x(), ts.x.pos.y(), ts.x.pos.z(), q.w,          q.xyz.x(),
                          q.xyz.y(),    q.xyz.z(),    ts.x.vel.x(), ts.x.vel.y(), ts.x.vel.z()};
    w.row(detail::to_ns(ts.t), v, 10);
  }
}

}  // namespace navfilter
