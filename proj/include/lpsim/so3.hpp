#pragma once

// Exact SO(3)/so(3) kernel: hat/vee, Cayley and exponential coordinates with
// their left-trivialized differentials, coadjoint action, polar projection.
//
// Conventions fixed here and relied on everywhere downstream:
//   hat(v) w = v x w
//   cay(v)  = (I - hat(v)/2)^{-1} (I + hat(v)/2),  Dcay(0) = id
//   Ad*_g mu = g mu   (left action; d/dt|0 Ad*_{cay(t xi)} mu = xi x mu)

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "lpsim/error.hpp"

namespace lpsim {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Element of so(3) ~ R^3 under the hat map; also the canonical chart
/// coordinate around the identity.
using AlgebraVector = Vec3;

/// Element of so(3)* ~ R^3 (body angular momentum). |mu| is the Casimir.
using Momentum = Vec3;

inline Mat3 hat(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return s;
}

inline Vec3 vee(const Mat3& s, double tol = 1e-12) {
  if ((s + s.transpose()).norm() > tol) {
    throw InvalidInput("vee: matrix is not skew-symmetric within tolerance");
  }
  return Vec3(s(2, 1), s(0, 2), s(1, 0));
}

/// Group element of SO(3).
struct Rotation {
  Mat3 m = Mat3::Identity();

  Rotation() = default;
  explicit Rotation(const Mat3& mat) : m(mat) {}

  static Rotation identity() { return Rotation(); }

  Rotation operator*(const Rotation& o) const { return Rotation(m * o.m); }
  Vec3 operator*(const Vec3& v) const { return m * v; }
  Rotation transposed() const { return Rotation(m.transpose()); }

  double orthogonality_defect() const { return (m.transpose() * m - Mat3::Identity()).norm(); }

  bool satisfies_invariants(double tol = 1e-12) const {
    return orthogonality_defect() <= tol && std::abs(m.determinant() - 1.0) <= tol;
  }
};

/// Nearest rotation in Frobenius norm (polar projection).
inline Rotation project_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (u * v.transpose()).determinant() < 0 ? -1.0 : 1.0;
  return Rotation(u * d * v.transpose());
}

/// Scaled Cayley map, defined for all v. Closed form of
/// (I - hat(v)/2)^{-1} (I + hat(v)/2); rotation about v by 2 atan(|v|/2).
inline Rotation cay(const Vec3& v) {
  const Mat3 h = hat(v);
  const double f = 4.0 / (4.0 + v.squaredNorm());
  return Rotation(Mat3::Identity() + f * (h + 0.5 * h * h));
}

/// Inverse of cay; requires rotation angle < pi (trace > -1).
inline Vec3 cay_inv(const Rotation& g, double tol = 1e-9) {
  const double denom = 1.0 + g.m.trace();
  if (denom <= tol) {
    throw ChartSingularity("cay_inv: rotation angle at or near pi");
  }
  return 2.0 * vee(g.m - g.m.transpose(), std::numeric_limits<double>::infinity()) / denom;
}

namespace detail {
// sin(t)/t and (1-cos(t))/t^2 with small-angle series.
inline double sinc(double t) {
  if (std::abs(t) < 1e-4) {
    const double t2 = t * t;
    return 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
  }
  return std::sin(t) / t;
}
inline double cosc(double t) {
  if (std::abs(t) < 1e-4) {
    const double t2 = t * t;
    return 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
  }
  return (1.0 - std::cos(t)) / (t * t);
}
// (t - sin t)/t^3
inline double sinc3(double t) {
  if (std::abs(t) < 1e-3) {
    const double t2 = t * t;
    return 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
  }
  return (t - std::sin(t)) / (t * t * t);
}
}  // namespace detail

/// Rodrigues formula.
inline Rotation exp_so3(const Vec3& v) {
  const double th = v.norm();
  const Mat3 h = hat(v);
  return Rotation(Mat3::Identity() + detail::sinc(th) * h + detail::cosc(th) * h * h);
}

/// Inverse of exp_so3 for angle < pi.
inline Vec3 log_so3(const Rotation& g, double tol = 1e-10) {
  const double c = std::clamp((g.m.trace() - 1.0) / 2.0, -1.0, 1.0);
  if (1.0 + c <= tol) {
    throw ChartSingularity("log_so3: rotation angle at or near pi");
  }
  const double th = std::acos(c);
  const Vec3 w(g.m(2, 1) - g.m(1, 2), g.m(0, 2) - g.m(2, 0), g.m(1, 0) - g.m(0, 1));
  return w / (2.0 * detail::sinc(th));
}

/// Coadjoint action Ad*_g mu = g mu. Norm-preserving; left action.
inline Momentum coadjoint(const Rotation& g, const Momentum& mu) { return g.m * mu; }

/// Left-trivialized differential A(v) of cay:
///   cay(v)^{-1} (d/de cay(v + e w))|_0 = hat(A(v) w).
/// A(0) = I and det A(v) = (1 + |v|^2/4)^{-2} > 0, so A is invertible on all of R^3.
inline Mat3 cay_dtriv(const Vec3& v) {
  return (Mat3::Identity() - 0.5 * hat(v)) / (1.0 + 0.25 * v.squaredNorm());
}

/// A(v)^{-T} for the Cayley chart; exact polynomial form.
inline Mat3 cay_dtriv_invT(const Vec3& v) {
  const Mat3 h = hat(v);
  return (1.0 + 0.25 * v.squaredNorm()) * Mat3::Identity() - 0.5 * h + 0.25 * h * h;
}

/// Left-trivialized differential of exp (the right Jacobian of SO(3)).
inline Mat3 exp_dtriv(const Vec3& v) {
  const double th = v.norm();
  const Mat3 h = hat(v);
  return Mat3::Identity() - detail::cosc(th) * h + detail::sinc3(th) * h * h;
}

/// exp_dtriv(v)^{-T} = J_l(v)^{-1} = I - hat(v)/2 + kappa(th) hat(v)^2,
/// kappa = 1/th^2 - cot(th/2)/(2 th).
inline Mat3 exp_dtriv_invT(const Vec3& v) {
  const double th2 = v.squaredNorm();
  double kappa;
  if (th2 < 1e-6) {
    kappa = 1.0 / 12.0 + th2 / 720.0 + th2 * th2 / 30240.0;
  } else {
    const double th = std::sqrt(th2);
    kappa = 1.0 / th2 - std::tan(M_PI_2 - th / 2.0) / (2.0 * th);
  }
  const Mat3 h = hat(v);
  return Mat3::Identity() - 0.5 * h + kappa * h * h;
}

}  // namespace lpsim
