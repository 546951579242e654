#pragma once

// Matrix-group kernel for the navigation filter: SO(3) helpers, the extended
// pose group SE_2(3) (rotation, position, velocity in one 5x5 matrix), the
// closed-form exponential of its tangent-like elements, and a small Hamilton
// quaternion toolkit used by the alternative attitude backend.

#include <Eigen/Dense>
#include <cmath>

#include "navfilter/errors.hpp"

namespace navfilter {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat5 = Eigen::Matrix<double, 5, 5>;

inline Mat3 skew(const Vec3& w) {
  Mat3 s;
  s << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return s;
}

// Inverse of skew. Input is assumed antisymmetric; only the three defining
// entries are read.
inline Vec3 vex(const Mat3& s) { return {s(2, 1), s(0, 2), s(1, 0)}; }

inline Mat3 antisym_part(const Mat3& m) { return 0.5 * (m - m.transpose()); }

// vex of the antisymmetric part, the rotation-error coordinates every
// correction term is built from.
inline Vec3 antisym_vex(const Mat3& m) {
  return 0.5 * Vec3(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
}

// Normalized distance to identity on SO(3), (1/4)tr(I - R), in [0, 1].
inline double rotation_distance(const Mat3& r) { return 0.25 * (3.0 - r.trace()); }

// Same functional weighted by a landmark Gram matrix: (1/4)tr(M - A) where
// A reconstructs M * Rtilde from measurements.
inline double weighted_rotation_distance(const Mat3& m, const Mat3& a) {
  return 0.25 * (m - a).trace();
}

namespace detail {

// Scalar coefficients of the exponential and its integral factors:
//   c1 = sin(t)/t          c2 = (1-cos(t))/t^2
//   c3 = (t-sin(t))/t^3    c4 = (t^2/2+cos(t)-1)/t^4
// Below the crossover the closed forms lose digits to cancellation (worst is
// c4, whose numerator is O(t^4) against absolute rounding of cos at 1 ulp),
// so small angles use Taylor expansions through t^4.
struct ExpCoeffs {
  double c1, c2, c3, c4;
};

inline ExpCoeffs exp_coeffs(double theta) {
  ExpCoeffs c;
  const double t2 = theta * theta;
  if (theta < 1e-2) {
    const double t4 = t2 * t2;
    c.c1 = 1.0 - t2 / 6.0 + t4 / 120.0;
    c.c2 = 0.5 - t2 / 24.0 + t4 / 720.0;
    c.c3 = 1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0;
    c.c4 = 1.0 / 24.0 - t2 / 720.0 + t4 / 40320.0;
  } else {
    const double s = std::sin(theta), co = std::cos(theta);
    c.c1 = s / theta;
    c.c2 = (1.0 - co) / t2;
    c.c3 = (theta - s) / (t2 * theta);
    c.c4 = (0.5 * t2 + co - 1.0) / (t2 * t2);
  }
  return c;
}

}  // namespace detail

inline Mat3 so3_exp(const Vec3& w) {
  const auto c = detail::exp_coeffs(w.norm());
  const Mat3 s = skew(w);
  const Mat3 s2 = s * s;
  return Mat3::Identity() + c.c1 * s + c.c2 * s2;
}

// Factors of the 5x5 exponential for a rotation increment theta = omega*dt:
//   rot  = exp([theta])
//   jac1 = sum [theta]^n / (n+1)!   (integrates a constant into velocity)
//   jac2 = sum [theta]^n / (n+2)!   (double-integrates it into position)
struct Se23ExpFactors {
  Mat3 rot, jac1, jac2;
};

inline Se23ExpFactors se23_exp_factors(const Vec3& theta) {
  const auto c = detail::exp_coeffs(theta.norm());
  const Mat3 s = skew(theta);
  const Mat3 s2 = s * s;
  Se23ExpFactors f;
  f.rot = Mat3::Identity() + c.c1 * s + c.c2 * s2;
  f.jac1 = Mat3::Identity() + c.c2 * s + c.c3 * s2;
  f.jac2 = 0.5 * Mat3::Identity() + c.c3 * s + c.c4 * s2;
  return f;
}

inline bool is_rotation(const Mat3& r, double tol = 1e-9) {
  return (r.transpose() * r - Mat3::Identity()).norm() <= tol && r.determinant() > 0.0;
}

// Nearest rotation to an almost-orthonormal matrix. Newton iteration on the
// polar factor for the typical drift-repair case, SVD for gross input.
inline Mat3 orthonormalize(const Mat3& r) {
  const double drift = (r.transpose() * r - Mat3::Identity()).norm();
  if (drift > 1e-3) {
    Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU();
    if ((u * svd.matrixV().transpose()).determinant() < 0.0) u.col(2) *= -1.0;
    return u * svd.matrixV().transpose();
  }
  Mat3 q = r;
  for (int i = 0; i < 8; ++i) {
    const Mat3 resid = q.transpose() * q - Mat3::Identity();
    if (resid.norm() < 1e-15) break;
    q = q - 0.5 * q * resid;
  }
  return q;
}

// Element of the tangent-like input space: angular rate, two translational
// columns and the lower coupling scalar. Embeds as
//   [ [omega]x  v  a ]
//   [    0      0  0 ]
//   [    0   kappa 0 ]
struct TangentElement {
  Vec3 omega = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();
  double kappa = 0.0;

  Mat3 omega_skew() const { return skew(omega); }

  Mat5 as_matrix() const {
    Mat5 m = Mat5::Zero();
    m.block<3, 3>(0, 0) = skew(omega);
    m.block<3, 1>(0, 3) = v;
    m.block<3, 1>(0, 4) = a;
    m(4, 3) = kappa;
    return m;
  }
};

// exp(u * dt) in closed form. Only the rotation block is transcendental; the
// translational columns fall out of the jac1/jac2 factors and the kappa entry
// passes through linearly because the generator is nilpotent below the
// rotation block.
inline Mat5 se23_exp(const TangentElement& u, double dt = 1.0) {
  const auto f = se23_exp_factors(Vec3(u.omega * dt));
  Mat5 m = Mat5::Identity();
  m.block<3, 3>(0, 0) = f.rot;
  m.block<3, 1>(0, 3) = f.jac1 * (u.v * dt) + (u.kappa * dt) * (f.jac2 * (u.a * dt));
  m.block<3, 1>(0, 4) = f.jac1 * (u.a * dt);
  m(4, 3) = u.kappa * dt;
  return m;
}

// Extended pose: attitude, inertial position and inertial velocity.
struct NavState {
  Mat3 rot = Mat3::Identity();
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();

  Mat5 as_matrix() const {
    Mat5 m = Mat5::Identity();
    m.block<3, 3>(0, 0) = rot;
    m.block<3, 1>(0, 3) = pos;
    m.block<3, 1>(0, 4) = vel;
    return m;
  }

  bool is_valid(double tol = 1e-9) const {
    return is_rotation(rot, tol) && pos.allFinite() && vel.allFinite();
  }

  static NavState from_matrix(const Mat5& m, double tol = 1e-9) {
    NavState x;
    x.rot = m.block<3, 3>(0, 0);
    x.pos = m.block<3, 1>(0, 3);
    x.vel = m.block<3, 1>(0, 4);
    Mat5 frame = Mat5::Identity();
    frame.block<3, 3>(0, 0) = x.rot;
    frame.block<3, 1>(0, 3) = x.pos;
    frame.block<3, 1>(0, 4) = x.vel;
    if ((m - frame).norm() > tol) throw InvalidState("matrix is not an extended pose");
    if (!is_rotation(x.rot, tol)) throw InvalidState("rotation block is not orthonormal");
    return x;
  }
};

// Hamilton quaternion (scalar part first, right-handed composition).
struct UnitQuaternion {
  double w = 1.0;
  Vec3 xyz = Vec3::Zero();

  static UnitQuaternion identity() { return {}; }

  double norm() const { return std::sqrt(w * w + xyz.squaredNorm()); }

  // Unit modulus plus the sign convention: scalar part kept non-negative.
  UnitQuaternion normalized() const {
    const double n = norm();
    UnitQuaternion q{w / n, xyz / n};
    if (q.w < 0.0) {
      q.w = -q.w;
      q.xyz = -q.xyz;
    }
    return q;
  }

  UnitQuaternion conjugate() const { return {w, -xyz}; }
  UnitQuaternion inverse() const { return conjugate(); }  // unit modulus assumed
};

// Hamilton product, rescaled to unit modulus (sign left untouched so
// composition chains stay continuous).
inline UnitQuaternion quat_mul(const UnitQuaternion& a, const UnitQuaternion& b) {
  UnitQuaternion q{a.w * b.w - a.xyz.dot(b.xyz),
                   a.w * b.xyz + b.w * a.xyz + a.xyz.cross(b.xyz)};
  const double n = q.norm();
  q.w /= n;
  q.xyz /= n;
  return q;
}

inline Mat3 quat_to_rot(const UnitQuaternion& q) {
  return (q.w * q.w - q.xyz.squaredNorm()) * Mat3::Identity() +
         2.0 * (q.xyz * q.xyz.transpose()) + 2.0 * q.w * skew(q.xyz);
}

// Shepperd-style extraction, branching on the largest diagonal combination.
inline UnitQuaternion quat_from_rot(const Mat3& r) {
  UnitQuaternion q;
  const double tr = r.trace();
  if (tr > 0.0) {
    const double s = std::sqrt(tr + 1.0) * 2.0;
    q.w = 0.25 * s;
    q.xyz = Vec3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) >= r(1, 1) && r(0, 0) >= r(2, 2)) {
    const double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
    q.w = (r(2, 1) - r(1, 2)) / s;
    q.xyz = Vec3(0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s);
  } else if (r(1, 1) >= r(2, 2)) {
    const double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
    q.w = (r(0, 2) - r(2, 0)) / s;
    q.xyz = Vec3((r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s);
  } else {
    const double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
    q.w = (r(1, 0) - r(0, 1)) / s;
    q.xyz = Vec3((r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s);
  }
  return q.normalized();
}

// Quaternion exponential of a rotation vector.
inline UnitQuaternion quat_exp(const Vec3& rotvec) {
  const double theta = rotvec.norm();
  const double half = 0.5 * theta;
  double sinc_half;  // sin(theta/2)/theta
  if (theta < 1e-2) {
    const double t2 = theta * theta;
    sinc_half = 0.5 - t2 / 48.0 + t2 * t2 / 3840.0;
  } else {
    sinc_half = std::sin(half) / theta;
  }
  return {std::cos(half), sinc_half * rotvec};
}

inline Vec3 quat_rotate(const UnitQuaternion& q, const Vec3& v) {
  const Vec3 t = 2.0 * q.xyz.cross(v);
  return v + q.w * t + q.xyz.cross(t);
}

// Spherical interpolation along the short arc.
inline UnitQuaternion slerp(const UnitQuaternion& a, const UnitQuaternion& b, double t) {
  UnitQuaternion bb = b;
  double dot = a.w * b.w + a.xyz.dot(b.xyz);
  if (dot < 0.0) {
    bb.w = -bb.w;
    bb.xyz = -bb.xyz;
    dot = -dot;
  }
  double wa, wb;
  if (dot > 1.0 - 1e-10) {
    wa = 1.0 - t;
    wb = t;
  } else {
    const double ang = std::acos(std::min(dot, 1.0));
    const double s = std::sin(ang);
    wa = std::sin((1.0 - t) * ang) / s;
    wb = std::sin(t * ang) / s;
  }
  UnitQuaternion q{wa * a.w + wb * bb.w, wa * a.xyz + wb * bb.xyz};
  const double n = q.norm();
  q.w /= n;
  q.xyz /= n;
  return q;
}

}  // namespace navfilter
