#pragma once

// Truncated generating-function series S(t,p) = sum_{k=1..K} t^k S_k(p) for
// the reduced Poisson Hamilton-Jacobi equation
//
//     dS/dt(t,p) + H( m(dS/dp(t,p), p) ) = 0,        S(0,p) = 0,
//
// where m(x,p) is the body momentum of the generating point with chart
// coordinate x and fiber label p. Two conventions for m are supported:
//
//   chart: m(x,p) = A(x)^{-T} p with A the left-trivialized differential of
//          the retraction — (x,p) are canonical cotangent-chart coordinates,
//          so { (dS/dp(p), p) } is a genuine Lagrangian submanifold and the
//          truncated series generates high-order Poisson maps. Default.
//   fiber: m(x,p) = ret(x) p — reads p as the left-trivialized fiber momentum
//          itself. Kept for comparison; the graph is not Lagrangian in these
//          coordinates and the induced steppers stall at low order.
//
// The recurrence k S_k = -[t^{k-1}] H(m(grad_p S^{(<k)}, p)) is explicit and
// closes over polynomials: each S_k is a polynomial of degree k+1.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lpsim/error.hpp"
#include "lpsim/phase.hpp"
#include "lpsim/poly.hpp"
#include "lpsim/so3.hpp"

namespace lpsim {

enum class Retraction { cayley, exponential };
enum class SeriesConvention { chart, fiber };

inline std::string to_string(Retraction r) {
  return r == Retraction::cayley ? "cayley" : "exp";
}
inline std::string to_string(SeriesConvention c) {
  return c == SeriesConvention::chart ? "chart" : "fiber";
}
inline Retraction retraction_from_string(const std::string& s) {
  if (s == "cayley" || s == "cay") return Retraction::cayley;
  if (s == "exp" || s == "exponential") return Retraction::exponential;
  throw ConfigError("unsupported retraction: " + s);
}
inline SeriesConvention convention_from_string(const std::string& s) {
  if (s == "chart") return SeriesConvention::chart;
  if (s == "fiber") return SeriesConvention::fiber;
  throw ConfigError("unsupported series convention: " + s);
}

/// The map K(xi, p) = Ad*_{cay(xi)} p: the left momentum of the generating
/// point read in the fiber convention. Norm-preserving in exact arithmetic;
/// K(0, p) = p and d/de K(e w, p)|_0 = w x p.
inline Momentum gen_point_momentum(const AlgebraVector& xi, const Momentum& p) {
  return coadjoint(cay(xi), p);
}

/// d K / d xi at (xi, p): -cay(xi) hat(p) A(xi), A = cay_dtriv.
inline Mat3 gen_point_momentum_dxi(const AlgebraVector& xi, const Momentum& p) {
  return -cay(xi).m * hat(p) * cay_dtriv(xi);
}

/// Body momentum of the generating point (numeric, untruncated lifts).
inline Momentum point_momentum(Retraction ret, SeriesConvention conv, const Vec3& xi,
                               const Momentum& p) {
  if (conv == SeriesConvention::chart) {
    return (ret == Retraction::cayley ? cay_dtriv_invT(xi) : exp_dtriv_invT(xi)) * p;
  }
  return (ret == Retraction::cayley ? cay(xi) : exp_so3(xi)).m * p;
}

struct GenSeries {
  int order = 0;
  Retraction retraction = Retraction::cayley;
  SeriesConvention convention = SeriesConvention::chart;
  Vec3 inertia{1.5, 2.0, 2.5};
  std::vector<PolyR3> coeffs;                  // coeffs[k-1] = S_k
  std::vector<std::array<PolyR3, 3>> grads;    // grads[k-1][a] = dS_k/dp_a

  ReducedHamiltonian hamiltonian() const { return ReducedHamiltonian(inertia); }

  double eval_S(double t, const Vec3& p) const {
    double acc = 0.0;
    for (int k = order; k >= 1; --k) acc = t * (acc + coeffs[k - 1].eval(p));
    return acc;
  }

  Vec3 eval_gradS(double t, const Vec3& p) const {
    Vec3 acc = Vec3::Zero();
    for (int k = order; k >= 1; --k) {
      Vec3 g(grads[k - 1][0].eval(p), grads[k - 1][1].eval(p), grads[k - 1][2].eval(p));
      acc = t * (acc + g);
    }
    return acc;
  }

  Mat3 eval_hessS(double t, const Vec3& p) const {
    Mat3 acc = Mat3::Zero();
    for (int k = order; k >= 1; --k) {
      Mat3 h;
      for (int a = 0; a < 3; ++a) h.row(a) = grads[k - 1][a].grad_eval(p).transpose();
      acc = t * (acc + h);
    }
    return acc;
  }

  double eval_dSdt(double t, const Vec3& p) const {
    double acc = 0.0;
    for (int k = order; k >= 1; --k) acc = acc * t + k * coeffs[k - 1].eval(p);
    return acc;
  }
};

namespace detail {

using SeriesVec3 = std::array<TSeries, 3>;

inline SeriesVec3 series_cross(const SeriesVec3& a, const SeriesVec3& b) {
  return SeriesVec3{a[1] * b[2] - a[2] * b[1],
                    a[2] * b[0] - a[0] * b[2],
                    a[0] * b[1] - a[1] * b[0]};
}

inline TSeries series_dot(const SeriesVec3& a, const SeriesVec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

// Scalar power series c0 + c1 q + c2 q^2 + ... evaluated at a TSeries q
// with q = O(t^2); enough terms are taken to fill the truncation order.
inline TSeries scalar_series(const std::vector<double>& c, const TSeries& q) {
  const int ord = q.order();
  TSeries acc = TSeries::constant(ord, PolyR3(c[0]));
  TSeries qp = TSeries::constant(ord, PolyR3(1.0));
  const int mmax = std::min<int>(static_cast<int>(c.size()) - 1, ord / 2 + 1);
  for (int m = 1; m <= mmax; ++m) {
    qp = qp * q;
    acc += c[static_cast<size_t>(m)] * qp;
  }
  return acc;
}

}  // namespace detail

/// Build the truncated generating series for the given reduced Hamiltonian.
inline GenSeries build_series(const ReducedHamiltonian& H, int order,
                              Retraction retraction = Retraction::cayley,
                              SeriesConvention convention = SeriesConvention::chart) {
  if (order < 1) throw ConfigError("build_series: order must be >= 1");

  GenSeries s;
  s.order = order;
  s.retraction = retraction;
  s.convention = convention;
  s.inertia = H.params.inertia;
  s.coeffs.resize(static_cast<size_t>(order));
  s.grads.resize(static_cast<size_t>(order));

  using detail::SeriesVec3;
  const PolyR3 p_var[3] = {PolyR3::variable(0), PolyR3::variable(1), PolyR3::variable(2)};

  for (int k = 1; k <= order; ++k) {
    const int ord = k - 1;  // truncation needed for the t^{k-1} coefficient

    SeriesVec3 xi{TSeries(ord), TSeries(ord), TSeries(ord)};
    for (int j = 1; j < k; ++j) {
      for (int a = 0; a < 3; ++a) {
        if (j <= ord) xi[a][j] += s.grads[static_cast<size_t>(j - 1)][static_cast<size_t>(a)];
      }
    }

    SeriesVec3 P{TSeries::constant(ord, p_var[0]), TSeries::constant(ord, p_var[1]),
                 TSeries::constant(ord, p_var[2])};
    const SeriesVec3 xp = detail::series_cross(xi, P);
    const SeriesVec3 xxp = detail::series_cross(xi, xp);
    const TSeries q = detail::series_dot(xi, xi);

    SeriesVec3 mu{TSeries(ord), TSeries(ord), TSeries(ord)};
    if (convention == SeriesConvention::chart && retraction == Retraction::cayley) {
      // A_cay(xi)^{-T} p = (1 + q/4) p - (xi x p)/2 + (xi x (xi x p))/4, exact.
      for (int a = 0; a < 3; ++a) {
        mu[a] = P[a] + 0.25 * (q * P[a]) - 0.5 * xp[a] + 0.25 * xxp[a];
      }
    } else if (convention == SeriesConvention::chart) {
      // A_exp(xi)^{-T} p = p - (xi x p)/2 + w(q) xi x (xi x p),
      // w = 1/12 + q/720 + q^2/30240 + q^3/1209600.
      const TSeries w = detail::scalar_series(
          {1.0 / 12.0, 1.0 / 720.0, 1.0 / 30240.0, 1.0 / 1209600.0}, q);
      for (int a = 0; a < 3; ++a) mu[a] = P[a] - 0.5 * xp[a] + w * xxp[a];
    } else if (retraction == Retraction::cayley) {
      // cay(xi) p = p + f(q) (xi x p + (xi x (xi x p))/2), f = 1/(1 + q/4).
      std::vector<double> geo;
      for (int m = 0; m <= ord / 2 + 1; ++m) geo.push_back(std::pow(-0.25, m));
      const TSeries f = detail::scalar_series(geo, q);
      for (int a = 0; a < 3; ++a) mu[a] = P[a] + f * (xp[a] + 0.5 * xxp[a]);
    } else {
      // exp(xi) p = p + sinc(|xi|) xi x p + cosc(|xi|) xi x (xi x p).
      std::vector<double> sa, sb;
      double fact = 1.0;
      for (int m = 0; m <= ord / 2 + 1; ++m) {
        const double sign = (m % 2 == 0) ? 1.0 : -1.0;
        fact = 1.0;
        for (int i = 2; i <= 2 * m + 1; ++i) fact *= i;
        sa.push_back(sign / fact);
        fact *= (2 * m + 2);
        sb.push_back(sign / fact);
      }
      const TSeries fsa = detail::scalar_series(sa, q);
      const TSeries fsb = detail::scalar_series(sb, q);
      for (int a = 0; a < 3; ++a) mu[a] = P[a] + fsa * xp[a] + fsb * xxp[a];
    }

    TSeries h(ord);
    for (int a = 0; a < 3; ++a) h += (0.5 / H.params.inertia[a]) * (mu[a] * mu[a]);

    PolyR3 Sk = (-1.0 / k) * h[ord];
    s.coeffs[static_cast<size_t>(k - 1)] = Sk;
    for (int a = 0; a < 3; ++a) {
      s.grads[static_cast<size_t>(k - 1)][static_cast<size_t>(a)] = Sk.diff(a);
    }
  }
  return s;
}

/// Pointwise residual of the truncated series in the HJ equation; O(t^K).
inline double hj_residual(const GenSeries& s, double t, const Vec3& p) {
  const Vec3 xi = s.eval_gradS(t, p);
  const Momentum m = point_momentum(s.retraction, s.convention, xi, p);
  return s.eval_dSdt(t, p) + s.hamiltonian()(m);
}

}  // namespace lpsim
