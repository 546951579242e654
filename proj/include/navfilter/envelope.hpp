#pragma once

// Prescribed-performance machinery. Each error channel gets a decaying
// envelope xi(t) and is mapped through a barrier-style transform that blows
// up near the moving bounds (-delta_lo * xi, +delta_hi * xi); the filter
// gains then act on the transformed error, which is what buys the guaranteed
// transient. A guard inflates the envelope when a disturbance pushes the
// error outside, keeping the transform defined.

#include <array>
#include <cmath>
#include <string>

#include "navfilter/errors.hpp"
#include "navfilter/se23.hpp"

namespace navfilter {

struct EnvelopeParams {
  double xi0 = 1.0;      // envelope value at t = 0
  double xi_inf = 0.05;  // steady-state floor
  double ell = 1.0;      // exponential decay rate
  double delta_lo = 1.0;
  double delta_hi = 1.0;

  void validate() const {
    if (!(xi_inf > 0.0)) throw ConfigError("envelope xi_inf must be positive");
    if (!(xi0 > xi_inf)) throw ConfigError("envelope xi0 must exceed xi_inf");
    if (!(ell > 0.0)) throw ConfigError("envelope decay rate must be positive");
    if (!(delta_lo > 0.0) || !(delta_hi > 0.0))
      throw ConfigError("envelope delta bounds must be positive");
  }
};

struct EnvelopeState {
  double xi = 0.0;
  double xi_dot = 0.0;
  double mu = 0.0;  // xi_dot / xi
};

inline EnvelopeState envelope_at(const EnvelopeParams& p, double t) {
  EnvelopeState s;
  const double decay = (p.xi0 - p.xi_inf) * std::exp(-p.ell * t);
  s.xi = decay + p.xi_inf;
  s.xi_dot = -p.ell * decay;
  s.mu = s.xi_dot / s.xi;
  return s;
}

struct TransformedChannel {
  double value = 0.0;  // transformed error
  double gain = 0.0;   // d(value)/d(e), always positive inside the bounds
};

// value = (1/2) ln((delta_lo + e/xi) / (delta_hi - e/xi)); gain is its exact
// derivative in e. With equal delta bounds the map is odd and value(0) = 0.
inline TransformedChannel transform_error(double e, double xi, const EnvelopeParams& p) {
  const double x = e / xi;
  const double lo = p.delta_lo + x;
  const double hi = p.delta_hi - x;
  if (!(lo > 0.0) || !(hi > 0.0))
    throw EnvelopeViolation("normalized error " + std::to_string(x) +
                            " outside (-" + std::to_string(p.delta_lo) + ", " +
                            std::to_string(p.delta_hi) + ")");
  TransformedChannel tc;
  tc.value = 0.5 * std::log(lo / hi);
  tc.gain = (1.0 / (2.0 * xi)) * (1.0 / lo + 1.0 / hi);
  return tc;
}

// Envelope guard: when the error reaches the envelope, inflate the envelope
// just past it so the transform stays defined.
inline double guard_envelope(double e, double xi, double eps) {
  const double mag = std::abs(e);
  return mag >= xi ? mag + eps : xi;
}

// The four error channels the filter constrains: the scalar attitude
// distance and the three components of the body-frame position error.
struct ErrorVector {
  double att = 0.0;
  Vec3 pos = Vec3::Zero();
};

struct TransformedError {
  double att = 0.0;
  Vec3 pos = Vec3::Zero();
  double gain_att = 0.0;
  Vec3 gain_pos = Vec3::Zero();
  std::array<double, 4> xi = {0, 0, 0, 0};  // per-channel envelope after guarding
  std::array<bool, 4> guarded = {false, false, false, false};
};

inline TransformedError transform_vector(const ErrorVector& e,
                                         const std::array<EnvelopeParams, 4>& banks, double t,
                                         double guard_eps_scale = 1e-3) {
  TransformedError out;
  for (int i = 0; i < 4; ++i) {
    const double ei = (i == 0) ? e.att : e.pos(i - 1);
    const auto env = envelope_at(banks[i], t);
    const double eps = guard_eps_scale * banks[i].xi_inf;
    // The transform is defined on (-delta_lo*xi, delta_hi*xi). With delta
    // bounds >= 1 the plain envelope guard suffices; with a bound below 1 the
    // feasible band is narrower than the envelope itself, so the guard has to
    // trip at the band edge. The inflated envelope parks the error at no more
    // than 90% of the band, keeping the barrier gain finite; for wide bounds
    // that reduces to the plain |e| + eps inflation.
    const double band = std::min(banks[i].delta_lo, banks[i].delta_hi);
    double xi = env.xi;
    if (std::abs(ei) >= std::min(1.0, band) * env.xi)
      xi = std::max(std::abs(ei) + eps, (std::abs(ei) + eps) / (0.9 * band));
    out.xi[i] = xi;
    out.guarded[i] = xi != env.xi;
    const auto tc = transform_error(ei, xi, banks[i]);
    if (i == 0) {
      out.att = tc.value;
      out.gain_att = tc.gain;
    } else {
      out.pos(i - 1) = tc.value;
      out.gain_pos(i - 1) = tc.gain;
    }
  }
  return out;
}

}  // namespace navfilter
