#pragma once

// Sparse multivariate polynomials in (p1, p2, p3) with real coefficients,
// plus truncated power series in t with PolyR3 coefficients. Both use ordered
// containers so arithmetic is deterministic and independent of build order.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "lpsim/error.hpp"

namespace lpsim {

class PolyR3 {
 public:
  using Exponent = std::array<int, 3>;
  using TermMap = std::map<Exponent, double>;

  PolyR3() = default;
  explicit PolyR3(double c) {
    if (c != 0.0) terms_[{0, 0, 0}] = c;
  }

  static PolyR3 variable(int axis, double scale = 1.0) {
    PolyR3 p;
    Exponent e{0, 0, 0};
    e[axis] = 1;
    p.terms_[e] = scale;
    return p;
  }

  static PolyR3 monomial(const Exponent& e, double c) {
    PolyR3 p;
    if (c != 0.0) p.terms_[e] = c;
    return p;
  }

  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  double max_abs_coeff() const {
    double m = 0.0;
    for (const auto& [e, c] : terms_) m = std::max(m, std::abs(c));
    return m;
  }

  double coeff(const Exponent& e) const {
    auto it = terms_.find(e);
    return it == terms_.end() ? 0.0 : it->second;
  }

  PolyR3& operator+=(const PolyR3& o) {
    for (const auto& [e, c] : o.terms_) add_term(e, c);
    return *this;
  }
  PolyR3& operator-=(const PolyR3& o) {
    for (const auto& [e, c] : o.terms_) add_term(e, -c);
    return *this;
  }
  friend PolyR3 operator+(PolyR3 a, const PolyR3& b) { return a += b; }
  friend PolyR3 operator-(PolyR3 a, const PolyR3& b) { return a -= b; }

  friend PolyR3 operator*(const PolyR3& a, const PolyR3& b) {
    PolyR3 r;
    for (const auto& [ea, ca] : a.terms_) {
      for (const auto& [eb, cb] : b.terms_) {
        r.add_term({ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]}, ca * cb);
      }
    }
    return r;
  }

  friend PolyR3 operator*(double s, const PolyR3& p) {
    PolyR3 r;
    if (s == 0.0) return r;
    for (const auto& [e, c] : p.terms_) r.terms_[e] = s * c;
    return r;
  }
  PolyR3 operator-() const { return -1.0 * *this; }

  /// Partial derivative with respect to p_{axis}.
  PolyR3 diff(int axis) const {
    PolyR3 r;
    for (const auto& [e, c] : terms_) {
      if (e[axis] == 0) continue;
      Exponent d = e;
      d[axis] -= 1;
      r.add_term(d, c * e[axis]);
    }
    return r;
  }

  double eval(const Eigen::Vector3d& p) const {
    double s = 0.0;
    for (const auto& [e, c] : terms_) {
      s += c * ipow(p.x(), e[0]) * ipow(p.y(), e[1]) * ipow(p.z(), e[2]);
    }
    return s;
  }

  Eigen::Vector3d grad_eval(const Eigen::Vector3d& p) const {
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    for (const auto& [e, c] : terms_) {
      const double m0 = ipow(p.x(), e[0]), m1 = ipow(p.y(), e[1]), m2 = ipow(p.z(), e[2]);
      if (e[0] > 0) g.x() += c * e[0] * ipow(p.x(), e[0] - 1) * m1 * m2;
      if (e[1] > 0) g.y() += c * e[1] * m0 * ipow(p.y(), e[1] - 1) * m2;
      if (e[2] > 0) g.z() += c * e[2] * m0 * m1 * ipow(p.z(), e[2] - 1);
    }
    return g;
  }

  Eigen::Matrix3d hess_eval(const Eigen::Vector3d& p) const {
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (int i = 0; i < 3; ++i) {
      const Eigen::Vector3d gi = diff(i).grad_eval(p);
      for (int j = 0; j < 3; ++j) h(i, j) = gi(j);
    }
    return h;
  }

  /// Drop coefficients with |c| <= eps (used to clean exact zeros).
  PolyR3 pruned(double eps) const {
    PolyR3 r;
    for (const auto& [e, c] : terms_) {
      if (std::abs(c) > eps) r.terms_[e] = c;
    }
    return r;
  }

  bool operator==(const PolyR3& o) const { return terms_ == o.terms_; }

 private:
  static double ipow(double x, int n) {
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= x;
    return r;
  }

  void add_term(const Exponent& e, double c) {
    auto [it, inserted] = terms_.try_emplace(e, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0.0) terms_.erase(it);
    }
  }

  TermMap terms_;
};

/// Truncated power series in t with PolyR3 coefficients: sum_k t^k c_k, k <= order.
class TSeries {
 public:
  explicit TSeries(int order) : coeffs_(static_cast<size_t>(order) + 1) {}

  static TSeries constant(int order, const PolyR3& c) {
    TSeries s(order);
    s.coeffs_[0] = c;
    return s;
  }

  int order() const { return static_cast<int>(coeffs_.size()) - 1; }
  PolyR3& operator[](int k) { return coeffs_[static_cast<size_t>(k)]; }
  const PolyR3& operator[](int k) const { return coeffs_[static_cast<size_t>(k)]; }

  TSeries& operator+=(const TSeries& o) {
    for (int k = 0; k <= std::min(order(), o.order()); ++k) coeffs_[k] += o[k];
    return *this;
  }
  TSeries& operator-=(const TSeries& o) {
    for (int k = 0; k <= std::min(order(), o.order()); ++k) coeffs_[k] -= o[k];
    return *this;
  }
  friend TSeries operator+(TSeries a, const TSeries& b) { return a += b; }
  friend TSeries operator-(TSeries a, const TSeries& b) { return a -= b; }

  friend TSeries operator*(const TSeries& a, const TSeries& b) {
    TSeries r(std::min(a.order(), b.order()));
    for (int i = 0; i <= a.order(); ++i) {
      if (a[i].is_zero()) continue;
      for (int j = 0; j + i <= r.order() && j <= b.order(); ++j) {
        if (b[j].is_zero()) continue;
        r[i + j] += a[i] * b[j];
      }
    }
    return r;
  }

  friend TSeries operator*(const PolyR3& c, const TSeries& s) {
    TSeries r(s.order());
    for (int k = 0; k <= s.order(); ++k) r[k] = c * s[k];
    return r;
  }
  friend TSeries operator*(double c, const TSeries& s) {
    TSeries r(s.order());
    for (int k = 0; k <= s.order(); ++k) r[k] = c * s[k];
    return r;
  }

 private:
  std::vector<PolyR3> coeffs_;
};

}  // namespace lpsim
