#include "navfilter/envelope.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "navfilter/errors.hpp"
#include "navfilter/rng.hpp"

using navfilter::EnvelopeParams;
using navfilter::ErrorVector;
using navfilter::Vec3;

namespace {

EnvelopeParams params(double xi0, double xi_inf, double ell, double dlo, double dhi) {
  EnvelopeParams p;
  p.xi0 = xi0;
  p.xi_inf = xi_inf;
  p.ell = ell;
  p.delta_lo = dlo;
  p.delta_hi = dhi;
  return p;
}

TEST(EnvelopeTest, DecayFrozenCase) {
  const auto p = params(0.53, 0.03, 1.2, 1.0, 1.0);
  EXPECT_NEAR(navfilter::envelope_at(p, 0.0).xi, 0.53, 1e-15);
  EXPECT_NEAR(navfilter::envelope_at(p, 1.0).xi, 0.180597105956101, 1e-12);
  EXPECT_NEAR(navfilter::envelope_at(p, 100.0).xi, 0.03, 1e-12);
  EXPECT_NEAR(navfilter::envelope_at(p, 0.0).xi_dot, -0.6, 1e-13);
  EXPECT_NEAR(navfilter::envelope_at(p, 0.0).mu, -0.6 / 0.53, 1e-13);
}

TEST(EnvelopeTest, DecayShapeProperties) {
  const auto p = params(2.0, 0.08, 0.9, 1.0, 1.0);
  double prev = navfilter::envelope_at(p, 0.0).xi;
  for (double t = 0.1; t < 20.0; t += 0.1) {
    const auto s = navfilter::envelope_at(p, t);
    EXPECT_LT(s.xi, prev);
    EXPECT_GT(s.xi, p.xi_inf);
    EXPECT_LT(s.xi_dot, 0.0);
    EXPECT_LT(s.mu, 0.0);
    prev = s.xi;
  }
  // xi_dot agrees with a finite difference of xi.
  for (double t : {0.05, 0.7, 3.0, 9.0}) {
    const double h = 1e-6;
    const double fd =
        (navfilter::envelope_at(p, t + h).xi - navfilter::envelope_at(p, t - h).xi) / (2.0 * h);
    EXPECT_NEAR(navfilter::envelope_at(p, t).xi_dot, fd, 1e-7);
  }
}

TEST(EnvelopeTest, TransformFrozenCase) {
  const auto p = params(1.0, 0.03, 1.2, 1.0, 1.0);
  const auto tr = navfilter::transform_error(0.5, 1.0, p);
  EXPECT_NEAR(tr.value, 0.5 * std::log(3.0), 1e-13);  // 0.549306144334055
  EXPECT_NEAR(tr.gain, 4.0 / 3.0, 1e-13);
  const auto zero = navfilter::transform_error(0.0, 1.0, p);
  EXPECT_NEAR(zero.value, 0.0, 1e-15);
  EXPECT_NEAR(zero.gain, 1.0, 1e-15);
}

TEST(EnvelopeTest, TransformOddAndMonotone) {
  const auto p = params(1.0, 0.03, 1.2, 0.8, 0.8);
  double prev = -1e9;
  for (double e = -0.7; e <= 0.7; e += 0.05) {
    const auto tr = navfilter::transform_error(e, 1.0, p);
    const auto mirrored = navfilter::transform_error(-e, 1.0, p);
    EXPECT_NEAR(tr.value, -mirrored.value, 1e-12);
    EXPECT_GT(tr.value, prev);
    EXPECT_GT(tr.gain, 0.0);
    prev = tr.value;
  }
}

TEST(EnvelopeTest, GainIsDerivativeOfTransform) {
  navfilter::Rng rng(42);
  for (int i = 0; i < 200; ++i) {
    const double dlo = rng.uniform(0.5, 2.0), dhi = rng.uniform(0.5, 2.0);
    const auto p = params(1.0, 0.03, 1.2, dlo, dhi);
    const double xi = rng.uniform(0.05, 2.0);
    const double e = rng.uniform(-0.9 * dlo * xi, 0.9 * dhi * xi);
    const double h = 1e-7 * xi;
    const double fd = (navfilter::transform_error(e + h, xi, p).value -
                       navfilter::transform_error(e - h, xi, p).value) /
                      (2.0 * h);
    const auto tr = navfilter::transform_error(e, xi, p);
    EXPECT_NEAR(tr.gain, fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST(EnvelopeTest, TransformThrowsOutsideBounds) {
  const auto p = params(1.0, 0.03, 1.2, 1.0, 1.0);
  EXPECT_THROW(navfilter::transform_error(1.2, 1.0, p), navfilter::EnvelopeViolation);
  EXPECT_THROW(navfilter::transform_error(-1.2, 1.0, p), navfilter::EnvelopeViolation);
  EXPECT_THROW(navfilter::transform_error(1.0, 1.0, p), navfilter::EnvelopeViolation);
  const auto narrow = params(1.0, 0.03, 1.2, 0.5, 0.5);
  EXPECT_THROW(navfilter::transform_error(0.6, 1.0, narrow), navfilter::EnvelopeViolation);
  EXPECT_NO_THROW(navfilter::transform_error(0.4, 1.0, narrow));
}

TEST(EnvelopeTest, GuardInflatesOnlyWhenBreached) {
  const double eps = 1e-3 * 0.03;
  EXPECT_NEAR(navfilter::guard_envelope(0.2, 0.15, eps), 0.2 + eps, 1e-15);
  EXPECT_NEAR(navfilter::guard_envelope(-0.2, 0.15, eps), 0.2 + eps, 1e-15);
  EXPECT_NEAR(navfilter::guard_envelope(0.1, 0.15, eps), 0.15, 1e-15);
  EXPECT_NEAR(navfilter::guard_envelope(0.15, 0.15, eps), 0.15 + eps, 1e-15);
  // Guarded value always re-admits the error for unit delta bounds.
  navfilter::Rng rng(1);
  const auto p = params(1.0, 0.03, 1.2, 1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const double e = rng.uniform(-5.0, 5.0);
    const double xi = navfilter::guard_envelope(e, rng.uniform(0.01, 1.0), eps);
    EXPECT_NO_THROW(navfilter::transform_error(e, xi, p));
  }
}

// d/dt E = gain * (de/dt - mu * e) along any smooth error path.
TEST(EnvelopeTest, TransformedDynamicsIdentity) {
  navfilter::Rng rng(7);
  const double h = 1e-5;
  for (int trial = 0; trial < 25; ++trial) {
    const auto p = params(rng.uniform(0.5, 2.0), rng.uniform(0.02, 0.1), rng.uniform(0.5, 2.0),
                          rng.uniform(0.8, 1.5), rng.uniform(0.8, 1.5));
    const double alpha = rng.uniform(-0.1, 0.1);
    const double beta = rng.uniform(0.05, 0.3);
    const double freq = rng.uniform(0.5, 3.0);
    const auto e_of = [&](double t) { return alpha + beta * std::sin(freq * t); };
    const auto e_dot = [&](double t) { return beta * freq * std::cos(freq * t); };
    const auto big_e = [&](double t) {
      return navfilter::transform_error(e_of(t), navfilter::envelope_at(p, t).xi, p).value;
    };
    for (double t : {0.1, 0.5, 1.3, 2.9}) {
      const auto env = navfilter::envelope_at(p, t);
      if (std::abs(e_of(t)) > 0.85 * std::min(p.delta_lo, p.delta_hi) * env.xi) continue;
      const double fd = (big_e(t + h) - big_e(t - h)) / (2.0 * h);
      const auto tr = navfilter::transform_error(e_of(t), env.xi, p);
      const double rhs = tr.gain * (e_dot(t) - env.mu * e_of(t));
      if (std::abs(rhs) < 0.01) continue;
      EXPECT_NEAR(fd, rhs, 1e-4 * std::abs(rhs)) << "trial " << trial << " t " << t;
    }
  }
}

TEST(EnvelopeTest, TransformVectorHandlesFourChannels) {
  std::array<EnvelopeParams, 4> banks = {params(0.76, 0.03, 1.2, 0.76, 0.76),
                                         params(2.4, 0.08, 1.2, 2.4, 2.4),
                                         params(2.2, 0.08, 1.2, 2.2, 2.2),
                                         params(2.0, 0.08, 1.2, 2.0, 2.0)};
  ErrorVector e;
  e.att = 0.2;
  e.pos = Vec3(0.2, -0.1, 0.0);
  const auto tr = navfilter::transform_vector(e, banks, 0.0);
  // Channel-by-channel agreement with the scalar op.
  const auto c1 = navfilter::transform_error(0.2, 0.76, banks[0]);
  EXPECT_NEAR(tr.att, c1.value, 1e-14);
  EXPECT_NEAR(tr.gain_att, c1.gain, 1e-14);
  for (int i = 0; i < 3; ++i) {
    const auto ci = navfilter::transform_error(e.pos(i), banks[i + 1].xi0, banks[i + 1]);
    EXPECT_NEAR(tr.pos(i), ci.value, 1e-14);
    EXPECT_NEAR(tr.gain_pos(i), ci.gain, 1e-14);
    EXPECT_FALSE(tr.guarded[i + 1]);
  }
  EXPECT_FALSE(tr.guarded[0]);

  // A breached channel trips its guard flag and still transforms.
  ErrorVector breach = e;
  breach.pos(0) = 3.0;
  const auto tg = navfilter::transform_vector(breach, banks, 0.0);
  EXPECT_TRUE(tg.guarded[1]);
  EXPECT_FALSE(tg.guarded[0]);
  EXPECT_GT(tg.xi[1], 3.0);
  EXPECT_TRUE(std::isfinite(tg.pos(0)));
}

TEST(EnvelopeTest, ParamValidation) {
  EXPECT_NO_THROW(params(0.76, 0.03, 1.2, 0.76, 0.76).validate());
  EXPECT_THROW(params(-0.5, 0.03, 1.2, 1.0, 1.0).validate(), navfilter::ConfigError);
  EXPECT_THROW(params(0.5, 0.0, 1.2, 1.0, 1.0).validate(), navfilter::ConfigError);
  EXPECT_THROW(params(0.02, 0.03, 1.2, 1.0, 1.0).validate(), navfilter::ConfigError);
  EXPECT_THROW(params(0.5, 0.03, -1.0, 1.0, 1.0).validate(), navfilter::ConfigError);
  EXPECT_THROW(params(0.5, 0.03, 1.2, 0.0, 1.0).validate(), navfilter::ConfigError);
}

}  // namespace
