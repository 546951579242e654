#pragma once

// Landmark bookkeeping: weighted point statistics and the reconstruction of
// the attitude/position error quantities from body-frame feature measurements
// against known landmark positions. The filter never sees raw rotations here;
// everything it corrects with is assembled from sums over features.

#include <unordered_map>
#include <vector>

#include "navfilter/errors.hpp"
#include "navfilter/rng.hpp"
#include "navfilter/se23.hpp"

namespace navfilter {

// Known inertial-frame point with a confidence weight.
struct Landmark {
  int id = 0;
  Vec3 p = Vec3::Zero();
  double s = 1.0;
};

// Body-frame measurement of one landmark, y = R^T (p - P) plus noise.
struct LandmarkObservation {
  int id = 0;
  Vec3 y = Vec3::Zero();
  double t = 0.0;
};

// One inertial sensor sample: gyro rate and specific force in body axes.
struct ImuSample {
  double t = 0.0;
  Vec3 omega = Vec3::Zero();
  Vec3 accel = Vec3::Zero();
};

// All landmark observations sharing one camera instant.
struct ObservationFrame {
  double t = 0.0;
  std::vector<LandmarkObservation> obs;
};

// Truth stream element.
struct TimedState {
  double t = 0.0;
  NavState x;
};

struct LandmarkStats {
  Vec3 centroid = Vec3::Zero();  // weighted mean position
  double total_weight = 0.0;
  Mat3 gram = Mat3::Zero();  // sum s_i (p_i - centroid)(p_i - centroid)^T
};

inline LandmarkStats landmark_stats(const std::vector<Landmark>& lms) {
  if (lms.empty()) throw EmptyLandmarkSet();
  LandmarkStats st;
  Mat3 second = Mat3::Zero();
  for (const auto& lm : lms) {
    st.total_weight += lm.s;
    st.centroid += lm.s * lm.p;
    second += lm.s * lm.p * lm.p.transpose();
  }
  st.centroid /= st.total_weight;
  st.gram = second - st.total_weight * st.centroid * st.centroid.transpose();
  st.gram = 0.5 * (st.gram + st.gram.transpose());
  return st;
}

// True when the weighted cloud spans at least a plane (second-largest Gram
// eigenvalue clear of zero). Collinear clouds leave the attitude correction
// blind around the line direction.
inline bool check_noncollinear(const std::vector<Landmark>& lms, double tol = 1e-9) {
  if (lms.size() < 3) return false;
  const auto st = landmark_stats(lms);
  Eigen::SelfAdjointEigenSolver<Mat3> es(st.gram);
  return es.eigenvalues()(1) > tol * std::max(1.0, es.eigenvalues()(2));
}

// Everything one correction needs, reconstructed from a set of observations
// and the predicted pose. gram_rot recovers gram * Rtilde in the noise-free
// case; mean_residual recovers the body-frame position error shifted by the
// centroid term.
struct MeasurementBundle {
  Vec3 centroid = Vec3::Zero();
  double total_weight = 0.0;
  Mat3 gram = Mat3::Zero();
  Mat3 gram_rot = Mat3::Zero();       // sum s_i (p_i - centroid) y_i^T R_pred^T
  Vec3 mean_residual = Vec3::Zero();  // (1/s_T) sum s_i (p_i - R_pred y_i - P_pred)
  int n_used = 0;
};

inline MeasurementBundle build_bundle(const std::vector<Landmark>& lms,
                                      const std::vector<LandmarkObservation>& obs,
                                      const Mat3& rot_pred, const Vec3& pos_pred) {
  if (lms.empty()) throw EmptyLandmarkSet();
  std::unordered_map<int, const Landmark*> by_id;
  by_id.reserve(lms.size());
  for (const auto& lm : lms) by_id[lm.id] = &lm;

  std::vector<Landmark> used;
  used.reserve(obs.size());
  for (const auto& o : obs) {
    const auto it = by_id.find(o.id);
    if (it == by_id.end()) throw UnknownLandmarkId(o.id);
    used.push_back(*it->second);
  }
  if (used.size() < 3)
    throw InsufficientFeatures("need at least 3 observed features, got " +
                               std::to_string(used.size()));
  if (!check_noncollinear(used))
    throw InsufficientFeatures("observed features are collinear");

  const auto st = landmark_stats(used);
  MeasurementBundle b;
  b.centroid = st.centroid;
  b.total_weight = st.total_weight;
  b.gram = st.gram;
  b.n_used = static_cast<int>(used.size());

  Mat3 cross = Mat3::Zero();
  Vec3 residual = Vec3::Zero();
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const Landmark& lm = used[i];
    cross += lm.s * (lm.p - st.centroid) * obs[i].y.transpose();
    residual += lm.s * (lm.p - rot_pred * obs[i].y - pos_pred);
  }
  b.gram_rot = cross * rot_pred.transpose();
  b.mean_residual = residual / st.total_weight;
  return b;
}

// Measurement corruption model: per-landmark additive bias plus isotropic
// white noise, both in the body frame.
struct ObservationNoise {
  double sigma = 0.0;
  std::unordered_map<int, Vec3> bias;

  Vec3 bias_for(int id) const {
    const auto it = bias.find(id);
    return it == bias.end() ? Vec3::Zero() : it->second;
  }
};

inline LandmarkObservation synthesize_observation(const Landmark& lm, const NavState& x,
                                                  const ObservationNoise& noise, Rng& rng,
                                                  double t = 0.0) {
  LandmarkObservation o;
  o.id = lm.id;
  o.t = t;
  o.y = x.rot.transpose() * (lm.p - x.pos) + noise.bias_for(lm.id);
  if (noise.sigma > 0.0) o.y += rng.gaussian_vec3(noise.sigma);
  return o;
}

}  // namespace navfilter
