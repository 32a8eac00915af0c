#pragma once

// Time-stepping maps.
//
// Geometric side: the implicit step generated by a GenSeries. Following the
// reconstruction recipe, the unknown is the chart coordinate x of the
// generating point matched so that the point's left momentum equals the input:
//
//     solve  x = gradS(-dt, A(x) mu)          (A = retraction dtriv)
//     then   mu_next = ret(x)^T mu,           g_next = g ret(x).
//
// The gradient is evaluated at -dt so that this direction of the solve
// produces the forward flow of mu' = mu x grad H; mu_next is an exact rotation
// of mu, so the Casimir |mu| is preserved to rounding, and g_next mu_next =
// g mu conserves J_L identically.
//
// Non-geometric baselines: embedded Dormand-Prince 5(4) on the raw 12-vector
// (g, mu) without any orthogonality projection, and forward Euler on so(3)*.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lpsim/error.hpp"
#include "lpsim/hj.hpp"
#include "lpsim/phase.hpp"
#include "lpsim/so3.hpp"

namespace lpsim {

struct NewtonConfig {
  double tol = 1e-12;
  int max_iter = 50;
  double damping = 0.5;     // backtracking factor
  bool fd_jacobian = false; // force finite-difference Jacobian

  void validate() const {
    if (!(tol > 0.0)) throw ConfigError("NewtonConfig: tol must be > 0");
    if (max_iter < 1) throw ConfigError("NewtonConfig: max_iter must be >= 1");
    if (!(damping > 0.0 && damping < 1.0)) {
      throw ConfigError("NewtonConfig: damping must be in (0,1)");
    }
  }
};

struct StepDetail {
  Momentum mu_next;
  Vec3 xi;  // chart coordinate of the generating point; g-increment is ret(xi)
  int iterations = 0;
  double residual = 0.0;
};

namespace detail {

inline Vec3 step_arg(const GenSeries& s, const Vec3& x, const Momentum& mu) {
  if (s.convention == SeriesConvention::chart) {
    return (s.retraction == Retraction::cayley ? cay_dtriv(x) : exp_dtriv(x)) * mu;
  }
  return (s.retraction == Retraction::cayley ? cay(x) : exp_so3(x)).m.transpose() * mu;
}

inline Mat3 step_arg_jacobian(const GenSeries& s, const Vec3& x, const Momentum& mu) {
  if (s.convention == SeriesConvention::chart && s.retraction == Retraction::cayley) {
    const double scale = 1.0 + 0.25 * x.squaredNorm();
    const Vec3 arg = (mu - 0.5 * x.cross(mu)) / scale;
    return (0.5 * hat(mu) - 0.5 * arg * x.transpose()) / scale;
  }
  if (s.convention == SeriesConvention::fiber && s.retraction == Retraction::cayley) {
    return cay(x).transposed().m * hat(mu) * cay_dtriv(-x);
  }
  Mat3 j;  // finite differences for the exp variants
  const double h = 1e-7;
  const Vec3 f0 = step_arg(s, x, mu);
  for (int c = 0; c < 3; ++c) {
    Vec3 xp = x;
    xp[c] += h;
    j.col(c) = (step_arg(s, xp, mu) - f0) / h;
  }
  return j;
}

}  // namespace detail

/// One implicit Poisson step on so(3)*; returns the solved generating-point
/// data. Throws StepFailure with the last residual on non-convergence.
inline StepDetail poisson_step_detail(const GenSeries& s, double dt, const Momentum& mu,
                                      const NewtonConfig& cfg = {}) {
  cfg.validate();
  const double tau = -dt;

  auto F = [&](const Vec3& x) -> Vec3 { return x - s.eval_gradS(tau, detail::step_arg(s, x, mu)); };

  Vec3 x = Vec3::Zero();
  Vec3 r = F(x);
  double rn = r.norm();
  int it = 0;
  for (; it < cfg.max_iter && rn > cfg.tol; ++it) {
    Mat3 J;
    if (cfg.fd_jacobian) {
      const double h = 1e-7;
      for (int c = 0; c < 3; ++c) {
        Vec3 xp = x;
        xp[c] += h;
        J.col(c) = (F(xp) - r) / h;
      }
    } else {
      const Vec3 arg = detail::step_arg(s, x, mu);
      J = Mat3::Identity() - s.eval_hessS(tau, arg) * detail::step_arg_jacobian(s, x, mu);
    }
    const Vec3 dx = J.partialPivLu().solve(-r);

    double lambda = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      const Vec3 x_new = x + lambda * dx;
      const Vec3 r_new = F(x_new);
      if (r_new.norm() < rn) {
        x = x_new;
        r = r_new;
        rn = r.norm();
        accepted = true;
        break;
      }
      lambda *= cfg.damping;
    }
    if (!accepted) break;
  }
  if (rn > cfg.tol) {
    throw StepFailure("poisson step: Newton did not converge", rn);
  }

  const Rotation g_inc = s.retraction == Retraction::cayley ? cay(x) : exp_so3(x);
  return StepDetail{g_inc.m.transpose() * mu, x, it, rn};
}

inline Momentum poisson_step(const GenSeries& s, double dt, const Momentum& mu,
                             const NewtonConfig& cfg = {}) {
  return poisson_step_detail(s, dt, mu, cfg).mu_next;
}

/// Equivariant step on T*SO(3) reconstructed from the reduced one.
/// Conserves j_left identically and commutes with the reduced step through
/// j_right by construction.
inline PhasePoint reconstruct_step(const GenSeries& s, double dt, const PhasePoint& z,
                                   const NewtonConfig& cfg = {}) {
  const StepDetail d = poisson_step_detail(s, dt, z.mu, cfg);
  const Rotation g_inc = s.retraction == Retraction::cayley ? cay(d.xi) : exp_so3(d.xi);
  return PhasePoint(z.g * g_inc, d.mu_next);
}

// ---------------------------------------------------------------------------
// Trajectories

struct TrajectoryMeta {
  std::string integrator;
  double dt = 0.0;
  int series_order = 0;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> extra;
};

template <class State>
struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  TrajectoryMeta meta;

  std::size_t size() const { return times.size(); }
};

/// Iterate any one-step map, recording all states. StepFailure is rethrown
/// with the failing step index attached.
template <class State, class Stepper>
Trajectory<State> run_trajectory(Stepper&& step, const State& z0, double dt, long n_steps,
                                 TrajectoryMeta meta = {}) {
  Trajectory<State> traj;
  traj.meta = std::move(meta);
  traj.meta.dt = dt;
  traj.times.reserve(static_cast<std::size_t>(n_steps) + 1);
  traj.states.reserve(static_cast<std::size_t>(n_steps) + 1);
  traj.times.push_back(0.0);
  traj.states.push_back(z0);
  State z = z0;
  for (long i = 0; i < n_steps; ++i) {
    try {
      z = step(z);
    } catch (const StepFailure& e) {
      throw StepFailure(std::string(e.what()), e.last_residual, i);
    }
    traj.times.push_back(static_cast<double>(i + 1) * dt);
    traj.states.push_back(z);
  }
  return traj;
}

/// Forward Euler on so(3)*: mu_{k+1} = mu_k + dt (mu_k x grad H). Drifts off
/// coadjoint orbits; kept as the non-geometric reference generator.
inline Trajectory<Momentum> euler_reduced(const ReducedHamiltonian& H, const Momentum& mu0,
                                          double dt, long n_steps) {
  auto step = [&](const Momentum& mu) { return (mu + dt * reduced_vector_field(H, mu)).eval(); };
  TrajectoryMeta meta;
  meta.integrator = "euler-reduced";
  return run_trajectory(step, mu0, dt, n_steps, meta);
}

// ---------------------------------------------------------------------------
// Embedded Dormand-Prince 5(4)

struct Rk45Options {
  double rtol = 1e-6;
  double atol = 1e-9;
  double initial_step = 0.0;  // 0: choose automatically
  long max_steps = 50'000'000;
};

namespace detail {

// Dense output coefficients for DOPRI5 (4th-order continuous extension).
constexpr double kDenseD1 = -12715105075.0 / 11282082432.0;
constexpr double kDenseD3 = 87487479700.0 / 32700410799.0;
constexpr double kDenseD4 = -10690763975.0 / 1880347072.0;
constexpr double kDenseD5 = 701980252875.0 / 199316789632.0;
constexpr double kDenseD6 = -1453857185.0 / 822651844.0;
constexpr double kDenseD7 = 69997945.0 / 29380423.0;

struct Dopri5Dense {
  double t0, h;
  Eigen::VectorXd r1, r2, r3, r4, r5;

  Eigen::VectorXd eval(double t) const {
    const double th = (t - t0) / h;
    const double th1 = 1.0 - th;
    return r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
  }
};

/// Integrate y' = f(y) from t0 to t1, sampling the dense output at the given
/// (sorted, within [t0, t1]) times. Returns the samples.
inline std::vector<Eigen::VectorXd> dopri5(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, Eigen::VectorXd y,
    double t0, double t1, const std::vector<double>& sample_times, const Rk45Options& opt) {
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                      a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                      e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const auto n = y.size();
  std::vector<Eigen::VectorXd> out;
  out.reserve(sample_times.size());
  std::size_t next_sample = 0;

  auto emit_until = [&](double t_lo, double t_hi, const Dopri5Dense& dense) {
    while (next_sample < sample_times.size() && sample_times[next_sample] <= t_hi + 1e-14) {
      const double ts = std::clamp(sample_times[next_sample], t_lo, t_hi);
      out.push_back(dense.eval(ts));
      ++next_sample;
    }
  };

  double t = t0;
  Eigen::VectorXd k1 = f(y);

  // emit samples exactly at t0
  while (next_sample < sample_times.size() && sample_times[next_sample] <= t0) {
    out.push_back(y);
    ++next_sample;
  }

  double h = opt.initial_step;
  if (h <= 0.0) {
    const double d0 = y.norm(), d1 = k1.norm();
    h = (d1 > 1e-12) ? 0.01 * std::max(d0, 1.0) / d1 : 1e-4 * (t1 - t0);
    h = std::min(h, (t1 - t0) / 10.0);
    h = std::max(h, 1e-10);
  }

  for (long step = 0;; ++step) {
    const double remaining = t1 - t;
    if (remaining <= 1e-12 * std::max(1.0, std::abs(t1))) break;
    if (step >= opt.max_steps) throw StepFailure("rk45: max step count exceeded", h);
    if (h < 1e-14 * std::max(1.0, std::abs(t))) {
      throw StepFailure("rk45: step size underflow", h);
    }
    h = std::min(h, remaining);

    const Eigen::VectorXd k2 = f(y + h * (a21 * k1));
    const Eigen::VectorXd k3 = f(y + h * (a31 * k1 + a32 * k2));
    const Eigen::VectorXd k4 = f(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Eigen::VectorXd k5 = f(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Eigen::VectorXd k6 = f(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Eigen::VectorXd y1 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Eigen::VectorXd k7 = f(y1);

    const Eigen::VectorXd err_v =
        h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double err = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(y1[i]));
      err += (err_v[i] / sc) * (err_v[i] / sc);
    }
    err = std::sqrt(err / static_cast<double>(n));

    if (err <= 1.0) {
      Dopri5Dense dense;
      dense.t0 = t;
      dense.h = h;
      dense.r1 = y;
      dense.r2 = y1 - y;
      dense.r3 = h * k1 - dense.r2;
      dense.r4 = dense.r2 - h * k7 - dense.r3;
      dense.r5 = h * (kDenseD1 * k1 + kDenseD3 * k3 + kDenseD4 * k4 + kDenseD5 * k5 +
                      kDenseD6 * k6 + kDenseD7 * k7);
      emit_until(t, t + h, dense);

      t += h;
      y = y1;
      k1 = k7;  // FSAL
    }
    const double fac = std::clamp(0.9 * std::pow(std::max(err, 1e-16), -0.2), 0.2, 5.0);
    h *= fac;
  }

  // flush any samples at exactly t1 left by rounding
  while (next_sample < sample_times.size()) {
    out.push_back(y);
    ++next_sample;
  }
  return out;
}

}  // namespace detail

inline std::vector<double> uniform_times(double t_end, long n_samples) {
  std::vector<double> ts(static_cast<std::size_t>(n_samples) + 1);
  for (long i = 0; i <= n_samples; ++i) ts[static_cast<std::size_t>(i)] = t_end * i / n_samples;
  return ts;
}

/// Adaptive Dormand-Prince 5(4) on the raw 12-dimensional embedding of
/// T*SO(3) (9 matrix entries + 3 momentum entries), with no reprojection to
/// the group. Samples the dense output at n_samples+1 uniform times.
inline Trajectory<PhasePoint> rk45_embedded(const ReducedHamiltonian& H, const PhasePoint& z0,
                                            double t_end, double rtol, double atol,
                                            long n_samples) {
  Rk45Options opt;
  opt.rtol = rtol;
  opt.atol = atol;

  auto pack = [](const PhasePoint& z) {
    Eigen::VectorXd y(12);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) y[3 * r + c] = z.g.m(r, c);
    y.segment<3>(9) = z.mu;
    return y;
  };
  auto unpack = [](const Eigen::VectorXd& y) {
    Mat3 g;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) g(r, c) = y[3 * r + c];
    return PhasePoint(Rotation(g), y.segment<3>(9));
  };

  auto f = [&](const Eigen::VectorXd& y) {
    const PhasePoint z = unpack(y);
    const PhaseTangent v = full_vector_field(H, z);
    Eigen::VectorXd dy(12);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) dy[3 * r + c] = v.g_dot(r, c);
    dy.segment<3>(9) = v.mu_dot;
    return dy;
  };

  const auto ts = uniform_times(t_end, n_samples);
  const auto ys = detail::dopri5(f, pack(z0), 0.0, t_end, ts, opt);

  Trajectory<PhasePoint> traj;
  traj.meta.integrator = "rk45-embedded";
  traj.meta.extra["rtol"] = std::to_string(rtol);
  traj.meta.extra["atol"] = std::to_string(atol);
  traj.times = ts;
  traj.states.reserve(ys.size());
  for (const auto& y : ys) traj.states.push_back(unpack(y));
  return traj;
}

/// Same engine on the reduced system mu' = mu x grad H; used as the
/// tight-tolerance reference oracle in order studies.
inline Trajectory<Momentum> rk45_reduced(const ReducedHamiltonian& H, const Momentum& mu0,
                                         double t_end, double rtol, double atol, long n_samples) {
  Rk45Options opt;
  opt.rtol = rtol;
  opt.atol = atol;
  auto f = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
    return reduced_vector_field(H, Vec3(y)).eval();
  };
  const auto ts = uniform_times(t_end, n_samples);
  const auto ys = detail::dopri5(f, mu0, 0.0, t_end, ts, opt);

  Trajectory<Momentum> traj;
  traj.meta.integrator = "rk45-reduced";
  traj.times = ts;
  traj.states.reserve(ys.size());
  for (const auto& y : ys) traj.states.push_back(Vec3(y));
  return traj;
}

}  // namespace lpsim
