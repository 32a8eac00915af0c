#pragma once

// Symmetry-aware learning of equivariant symplectic maps via reduced
// generating functions, the non-symmetric type-II baseline, Poisson-map
// learning, and geometrization of non-geometric integrators.
//
// The symmetric pipeline works entirely on the reduced data (xi_i, p_i):
// a scalar net S(p; W) is trained so that dS/dp(p_i) ~ xi_i, and prediction
// reconstructs the equivariant map by solving
//
//     cay(dS/dp(p)) p = mu_in   for p,    z_out = (g_in cay(xi), p).
//
// Whatever the weights, the reconstructed map conserves J_L to solver
// tolerance and preserves |mu| exactly: the conservation laws are
// architectural, not learned.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lpsim/error.hpp"
#include "lpsim/hj.hpp"
#include "lpsim/integrators.hpp"
#include "lpsim/mlp.hpp"
#include "lpsim/phase.hpp"
#include "lpsim/rng.hpp"
#include "lpsim/so3.hpp"

namespace lpsim {

// ---------------------------------------------------------------------------
// Datasets

struct DatasetMeta {
  std::string generator;
  std::uint64_t seed = 0;
  double dt = 0.0;
  double noise_sigma2 = 0.0;
  long rejected = 0;
  std::map<std::string, std::string> extra;
};

/// Pairs (z_in, z_out) on T*SO(3). Clean geometric data satisfies
/// j_left(z_in) = j_left(z_out) within 1e-10.
struct PhasePairDataset {
  std::vector<PhasePoint> in;
  std::vector<PhasePoint> out;
  double dt = 0.0;
  DatasetMeta meta;

  std::size_t size() const { return in.size(); }
};

/// Pairs (mu_in, mu_out) on so(3)*.
struct MomentumPairDataset {
  std::vector<Momentum> in;
  std::vector<Momentum> out;
  double dt = 0.0;
  DatasetMeta meta;

  std::size_t size() const { return in.size(); }
};

/// Reduced records (xi_target, p_input): xi = cay^{-1}(g_in^{-1} g_out),
/// p = mu_out.
struct ReducedDataset {
  std::vector<AlgebraVector> xi;
  std::vector<Momentum> p;
  DatasetMeta meta;

  std::size_t size() const { return xi.size(); }
};

inline double max_momentum_compat_violation(const PhasePairDataset& d) {
  double worst = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    worst = std::max(worst, (j_left(d.in[i]) - j_left(d.out[i])).norm());
  }
  return worst;
}

/// Reduction (a', a'') -> (g')^{-1} a''. Chart-singular records (relative
/// rotation at angle >= pi) are dropped and counted in meta.rejected.
inline ReducedDataset reduce_dataset(const PhasePairDataset& d) {
  ReducedDataset r;
  r.meta = d.meta;
  r.meta.generator = "reduce(" + d.meta.generator + ")";
  r.meta.rejected = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Rotation rel = d.in[i].g.transposed() * d.out[i].g;
    try {
      r.xi.push_back(cay_inv(rel));
    } catch (const ChartSingularity&) {
      ++r.meta.rejected;
      continue;
    }
    r.p.push_back(d.out[i].mu);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Chart on T*SO(3) (canonical cotangent coordinates of the Cayley chart)

struct ChartPoint {
  Vec3 x;
  Vec3 pi;
};

/// (g, mu) -> (x, pi) with x = cay^{-1}(g), pi = A(x)^T mu. A canonical
/// (symplectic) chart by construction of the cotangent lift.
inline ChartPoint chart_lift(const PhasePoint& z) {
  const Vec3 x = cay_inv(z.g);
  return ChartPoint{x, cay_dtriv(x).transpose() * z.mu};
}

inline PhasePoint chart_unlift(const ChartPoint& c) {
  return PhasePoint(cay(c.x), cay_dtriv_invT(c.x) * c.pi);
}

// ---------------------------------------------------------------------------
// Training configuration

enum class LossVariant { chart, exp_retraction };

struct TrainConfig {
  AdamConfig adam;
  long steps = 1000;
  long batch_size = 0;  // 0: full batch
  LossVariant loss = LossVariant::chart;
  std::uint64_t seed = 0;
  bool latent_points = false;   // train_poisson: free p_i (the joint scheme)
  double latent_penalty = 1.0;  // weight of |p_i - mu''_i|^2 in that scheme

  void validate() const {
    if (!(adam.lr > 0.0)) throw ConfigError("TrainConfig: lr must be > 0");
    if (steps < 1) throw ConfigError("TrainConfig: steps must be >= 1");
    if (batch_size < 0) throw ConfigError("TrainConfig: batch_size must be >= 0");
  }
};

struct TrainResult {
  ScalarNet net;
  std::vector<double> loss_history;
  double final_loss = 0.0;
  double final_grad_norm = 0.0;
};

// ---------------------------------------------------------------------------
// Loss evaluation (model-agnostic; used by tests and metrics)

using ScalarModel = std::function<NetEval(const VectorXd&)>;

inline ScalarModel model_of(const ScalarNet& net) {
  return [net](const VectorXd& p) { return net_eval(net, p); };
}

/// Mean squared residual of the symmetric (chart-coordinates) objective.
inline double symmetric_loss(const ScalarModel& model, const ReducedDataset& d) {
  if (d.size() == 0) throw ConfigError("symmetric_loss: empty dataset");
  double acc = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    acc += (model(d.p[i]).gradS - d.xi[i]).squaredNorm();
  }
  return acc / static_cast<double>(d.size());
}

/// Exp-retraction variant: mean |log(cay(xi)^{-1} cay(gradS))|^2.
inline double symmetric_loss_exp(const ScalarModel& model, const ReducedDataset& d) {
  if (d.size() == 0) throw ConfigError("symmetric_loss_exp: empty dataset");
  double acc = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Rotation rel = cay(d.xi[i]).transposed() * cay(Vec3(model(d.p[i]).gradS));
    acc += log_so3(rel).squaredNorm();
  }
  return acc / static_cast<double>(d.size());
}

/// Poisson objective with p_i pinned to mu''_i: mean |K(gradS(mu''), mu'') - mu'|^2.
inline double poisson_loss(const ScalarModel& model, const MomentumPairDataset& d) {
  if (d.size() == 0) throw ConfigError("poisson_loss: empty dataset");
  double acc = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Vec3 xi = model(d.out[i]).gradS;
    acc += (gen_point_momentum(xi, d.out[i]) - d.in[i]).squaredNorm();
  }
  return acc / static_cast<double>(d.size());
}

/// Type-II objective in chart coordinates for a 6-input model S(x', pi''):
/// mean [ |pi' - dS/dx'|^2 + |x'' - dS/dpi''|^2 ].
inline double nonsymmetric_loss(const ScalarModel& model, const std::vector<ChartPoint>& in,
                                const std::vector<ChartPoint>& out) {
  if (in.empty() || in.size() != out.size()) {
    throw ConfigError("nonsymmetric_loss: empty or mismatched dataset");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    VectorXd q(6);
    q << in[i].x, out[i].pi;
    const VectorXd g = model(q).gradS;
    acc += (g.head<3>() - in[i].pi).squaredNorm() + (g.tail<3>() - out[i].x).squaredNorm();
  }
  return acc / static_cast<double>(in.size());
}

// ---------------------------------------------------------------------------
// Loss gradients (batched; each is checked against finite differences)

struct LossGrad {
  double loss = 0.0;
  VectorXd grad_w;       // d loss / d weights, flat layout
  MatrixXd grad_inputs;  // d loss / d inputs (columns), when requested
};

/// Symmetric objective on columns (P, Xi).
inline LossGrad symmetric_loss_grad(const ScalarNet& net, const MatrixXd& P, const MatrixXd& Xi,
                                    LossVariant variant, long step_for_errors = -1) {
  const long len = P.cols();
  const ForwardCache c = net_forward(net, P);
  const MatrixXd G = net_input_grads(net, c);

  LossGrad out;
  MatrixXd U(3, len);
  if (variant == LossVariant::chart) {
    const MatrixXd R = G - Xi;
    out.loss = R.squaredNorm() / static_cast<double>(len);
    U = (2.0 / static_cast<double>(len)) * R;
  } else {
    for (long i = 0; i < len; ++i) {
      const Vec3 xi = Xi.col(i);
      const Vec3 g = G.col(i);
      Vec3 r;
      try {
        r = log_so3(cay(xi).transposed() * cay(g));
      } catch (const ChartSingularity&) {
        throw TrainingFailure("exp-retraction residual left the log chart", step_for_errors);
      }
      out.loss += r.squaredNorm() / static_cast<double>(len);
      // d|r|^2/dg = 2 r^T J_r(r)^{-1} A_cay(g)
      const Mat3 drdg = exp_dtriv(r).partialPivLu().solve(cay_dtriv(g));
      U.col(i) = (2.0 / static_cast<double>(len)) * drdg.transpose() * r;
    }
  }

  const TangentCache t = net_tangent(net, c, U);
  out.grad_w = net_nested_backward(net, c, t, RowVectorXd::Zero(len), RowVectorXd::Ones(len))
                   .grads.flatten();
  return out;
}

/// Poisson objective on columns (Mu1 targets, P generating points). When
/// `tether` is non-null the p-gradient is also produced, with the attachment
/// penalty latent_penalty |p_i - tether_i|^2 added to the loss.
inline LossGrad poisson_loss_grad(const ScalarNet& net, const MatrixXd& Mu1, const MatrixXd& P,
                                  const MatrixXd* tether = nullptr, double latent_penalty = 0.0) {
  const long len = P.cols();
  const ForwardCache c = net_forward(net, P);
  const MatrixXd G = net_input_grads(net, c);

  LossGrad out;
  MatrixXd U(3, len);
  MatrixXd direct = MatrixXd::Zero(3, len);
  for (long i = 0; i < len; ++i) {
    const Vec3 xi = G.col(i);
    const Vec3 p = P.col(i);
    const Vec3 r = gen_point_momentum(xi, p) - Vec3(Mu1.col(i));
    out.loss += r.squaredNorm() / static_cast<double>(len);
    U.col(i) = (2.0 / static_cast<double>(len)) * gen_point_momentum_dxi(xi, p).transpose() * r;
    if (tether != nullptr) {
      const Vec3 a = p - Vec3(tether->col(i));
      out.loss += latent_penalty * a.squaredNorm() / static_cast<double>(len);
      direct.col(i) = (2.0 / static_cast<double>(len)) *
                      (cay(xi).transposed().m * r + latent_penalty * a);
    }
  }

  const TangentCache t = net_tangent(net, c, U);
  const NestedBackResult back =
      net_nested_backward(net, c, t, RowVectorXd::Zero(len), RowVectorXd::Ones(len));
  out.grad_w = back.grads.flatten();
  if (tether != nullptr) {
    // dK/dp at fixed xi is cay(xi); the gradS(p) channel contributes Hess(p) u
    out.grad_inputs = back.input_abar + direct;
  }
  return out;
}

/// Type-II objective on 6-column inputs X = [x'; pi''] and targets T = [pi'; x''].
inline LossGrad nonsymmetric_loss_grad(const ScalarNet& net, const MatrixXd& X,
                                       const MatrixXd& T) {
  const long len = X.cols();
  const ForwardCache c = net_forward(net, X);
  const MatrixXd R = net_input_grads(net, c) - T;

  LossGrad out;
  out.loss = R.squaredNorm() / static_cast<double>(len);
  const MatrixXd U = (2.0 / static_cast<double>(len)) * R;
  const TangentCache t = net_tangent(net, c, U);
  out.grad_w = net_nested_backward(net, c, t, RowVectorXd::Zero(len), RowVectorXd::Ones(len))
                   .grads.flatten();
  return out;
}

// ---------------------------------------------------------------------------
// Training loops

namespace detail {

inline void check_finite(double loss, long step) {
  if (!std::isfinite(loss)) {
    throw TrainingFailure("training diverged (loss is not finite)", step);
  }
}

// Deterministic contiguous mini-batch slices; full batch when batch_size = 0.
struct BatchPlan {
  long n, bs;
  long batches() const { return bs == 0 ? 1 : (n + bs - 1) / bs; }
  std::pair<long, long> slice(long step) const {
    if (bs == 0) return {0, n};
    const long b = step % batches();
    const long lo = b * bs;
    return {lo, std::min(bs, n - lo)};
  }
};

}  // namespace detail

/// Minimize the symmetric objective over net weights with (full-batch) Adam.
/// Deterministic given (net seed, cfg).
inline TrainResult train_symmetric(const ReducedDataset& d, ScalarNet net,
                                   const TrainConfig& cfg) {
  cfg.validate();
  const long n = static_cast<long>(d.size());
  if (n == 0) throw ConfigError("train_symmetric: empty dataset");
  if (net.input_dim() != 3) throw ConfigError("train_symmetric: net must take 3 inputs");

  MatrixXd P(3, n), Xi(3, n);
  for (long i = 0; i < n; ++i) {
    P.col(i) = d.p[static_cast<std::size_t>(i)];
    Xi.col(i) = d.xi[static_cast<std::size_t>(i)];
  }

  TrainResult res;
  res.loss_history.reserve(static_cast<std::size_t>(cfg.steps));
  Adam opt(net.param_count(), cfg.adam);
  VectorXd theta = net.flatten();
  const detail::BatchPlan plan{n, cfg.batch_size};

  for (long step = 0; step < cfg.steps; ++step) {
    const auto [lo, len] = plan.slice(step);
    net.set_from_flat(theta);
    const LossGrad lg =
        symmetric_loss_grad(net, P.middleCols(lo, len), Xi.middleCols(lo, len), cfg.loss, step);
    detail::check_finite(lg.loss, step);
    res.loss_history.push_back(lg.loss);
    if (step + 1 == cfg.steps) res.final_grad_norm = lg.grad_w.norm();
    opt.step(theta, lg.grad_w);
  }

  net.set_from_flat(theta);
  res.final_loss = res.loss_history.empty() ? 0.0 : res.loss_history.back();
  res.net = std::move(net);
  return res;
}

/// Minimize the Poisson objective. With cfg.latent_points the generating
/// points p_i are free parameters initialized at mu''_i and tethered by
/// cfg.latent_penalty |p_i - mu''_i|^2; otherwise p_i is pinned to mu''_i.
inline TrainResult train_poisson(const MomentumPairDataset& d, ScalarNet net,
                                 const TrainConfig& cfg) {
  cfg.validate();
  const long n = static_cast<long>(d.size());
  if (n == 0) throw ConfigError("train_poisson: empty dataset");
  if (net.input_dim() != 3) throw ConfigError("train_poisson: net must take 3 inputs");
  if (cfg.batch_size != 0 && cfg.latent_points) {
    throw ConfigError("train_poisson: latent points require full-batch training");
  }

  MatrixXd Mu1(3, n), Mu2(3, n);
  for (long i = 0; i < n; ++i) {
    Mu1.col(i) = d.in[static_cast<std::size_t>(i)];
    Mu2.col(i) = d.out[static_cast<std::size_t>(i)];
  }

  TrainResult res;
  res.loss_history.reserve(static_cast<std::size_t>(cfg.steps));
  const long nw = net.param_count();
  const long np = cfg.latent_points ? 3 * n : 0;
  Adam opt(nw + np, cfg.adam);
  VectorXd theta(nw + np);
  theta.head(nw) = net.flatten();
  if (cfg.latent_points) theta.tail(np) = Eigen::Map<const VectorXd>(Mu2.data(), np);
  const detail::BatchPlan plan{n, cfg.batch_size};

  for (long step = 0; step < cfg.steps; ++step) {
    const auto [lo, len] = plan.slice(step);
    net.set_from_flat(theta.head(nw));

    LossGrad lg;
    if (cfg.latent_points) {
      const MatrixXd P = Eigen::Map<const MatrixXd>(theta.tail(np).data(), 3, n);
      lg = poisson_loss_grad(net, Mu1, P, &Mu2, cfg.latent_penalty);
    } else {
      lg = poisson_loss_grad(net, Mu1.middleCols(lo, len), Mu2.middleCols(lo, len));
    }
    detail::check_finite(lg.loss, step);
    res.loss_history.push_back(lg.loss);

    VectorXd grad(nw + np);
    grad.head(nw) = lg.grad_w;
    if (cfg.latent_points) {
      grad.tail(np) = Eigen::Map<const VectorXd>(lg.grad_inputs.data(), np);
    }
    if (step + 1 == cfg.steps) res.final_grad_norm = grad.norm();
    opt.step(theta, grad);
  }

  net.set_from_flat(theta.head(nw));
  res.final_loss = res.loss_history.empty() ? 0.0 : res.loss_history.back();
  res.net = std::move(net);
  return res;
}

/// Type-II baseline on chart coordinates: S2(x', pi''; W) with 6 inputs.
/// Symplectic in the chart, but neither equivariant nor momentum-preserving.
inline TrainResult train_nonsymmetric(const PhasePairDataset& d, ScalarNet net,
                                      const TrainConfig& cfg) {
  cfg.validate();
  const long n = static_cast<long>(d.size());
  if (n == 0) throw ConfigError("train_nonsymmetric: empty dataset");
  if (net.input_dim() != 6) throw ConfigError("train_nonsymmetric: net must take 6 inputs");

  MatrixXd X(6, n), T(6, n);
  for (long i = 0; i < n; ++i) {
    const ChartPoint a = chart_lift(d.in[static_cast<std::size_t>(i)]);
    const ChartPoint b = chart_lift(d.out[static_cast<std::size_t>(i)]);
    X.col(i) << a.x, b.pi;
    T.col(i) << a.pi, b.x;
  }

  TrainResult res;
  res.loss_history.reserve(static_cast<std::size_t>(cfg.steps));
  Adam opt(net.param_count(), cfg.adam);
  VectorXd theta = net.flatten();
  const detail::BatchPlan plan{n, cfg.batch_size};

  for (long step = 0; step < cfg.steps; ++step) {
    const auto [lo, len] = plan.slice(step);
    net.set_from_flat(theta);
    const LossGrad lg =
        nonsymmetric_loss_grad(net, X.middleCols(lo, len), T.middleCols(lo, len));
    detail::check_finite(lg.loss, step);
    res.loss_history.push_back(lg.loss);
    if (step + 1 == cfg.steps) res.final_grad_norm = lg.grad_w.norm();
    opt.step(theta, lg.grad_w);
  }

  net.set_from_flat(theta);
  res.final_loss = res.loss_history.empty() ? 0.0 : res.loss_history.back();
  res.net = std::move(net);
  return res;
}

// ---------------------------------------------------------------------------
// Prediction

/// Solve cay(gradS(p)) p = mu for p (the reconstruction solve with a learned
/// generating function). Returns the generating-point data.
inline StepDetail net_generating_solve(const ScalarNet& net, const Momentum& mu,
                                       const NewtonConfig& cfg = {}) {
  cfg.validate();

  auto F = [&](const Vec3& p) -> Vec3 {
    return gen_point_momentum(net_eval(net, p).gradS, p) - mu;
  };
  auto jac = [&](const Vec3& p) -> Mat3 {
    const Vec3 xi = net_eval(net, p).gradS;
    Mat3 hess;
    for (int a = 0; a < 3; ++a) hess.col(a) = net_hess_vec(net, p, Vec3::Unit(a));
    return gen_point_momentum_dxi(xi, p) * hess + cay(xi).m;
  };

  Vec3 p = mu;
  Vec3 r = F(p);
  double rn = r.norm();
  int it = 0;
  for (; it < cfg.max_iter && rn > cfg.tol; ++it) {
    Mat3 J;
    if (cfg.fd_jacobian) {
      const double h = 1e-7;
      for (int c = 0; c < 3; ++c) {
        Vec3 pp = p;
        pp[c] += h;
        J.col(c) = (F(pp) - r) / h;
      }
    } else {
      J = jac(p);
    }
    const Vec3 dp = J.partialPivLu().solve(-r);
    double lambda = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      const Vec3 p_new = p + lambda * dp;
      const Vec3 r_new = F(p_new);
      if (r_new.norm() < rn) {
        p = p_new;
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
    throw StepFailure("generating-function prediction: Newton did not converge", rn);
  }
  return StepDetail{p, net_eval(net, p).gradS, it, rn};
}

/// Reduced prediction mu' -> mu'' with a learned S. Preserves |mu| exactly.
inline Momentum predict_reduced(const ScalarNet& net, const Momentum& mu,
                                const NewtonConfig& cfg = {}) {
  return net_generating_solve(net, mu, cfg).mu_next;
}

/// Equivariant prediction on T*SO(3): identical contract to reconstruct_step
/// with the series gradient replaced by the net gradient (the trained net
/// absorbs the time step). Conserves j_left to solver tolerance for any
/// weights.
inline PhasePoint predict_symmetric(const ScalarNet& net, const PhasePoint& z,
                                    const NewtonConfig& cfg = {}) {
  const StepDetail d = net_generating_solve(net, z.mu, cfg);
  return PhasePoint(z.g * cay(d.xi), d.mu_next);
}

/// Prediction with the type-II baseline: given z, solve
///   pi' = dS/dx'(x', pi''),  then  x'' = dS/dpi''(x', pi'').
inline PhasePoint predict_nonsymmetric(const ScalarNet& net, const PhasePoint& z,
                                       const NewtonConfig& cfg = {}) {
  cfg.validate();
  const ChartPoint a = chart_lift(z);

  auto F = [&](const Vec3& pi2) -> Vec3 {
    VectorXd q(6);
    q << a.x, pi2;
    return Vec3(net_eval(net, q).gradS.head<3>()) - a.pi;
  };

  Vec3 pi2 = a.pi;
  Vec3 r = F(pi2);
  double rn = r.norm();
  for (int it = 0; it < cfg.max_iter && rn > cfg.tol; ++it) {
    Mat3 J;
    VectorXd q(6);
    q << a.x, pi2;
    for (int c = 0; c < 3; ++c) {
      VectorXd u = VectorXd::Zero(6);
      u[3 + c] = 1.0;
      J.col(c) = net_hess_vec(net, q, u).head<3>();
    }
    const Vec3 dpi = J.partialPivLu().solve(-r);
    double lambda = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      const Vec3 cand = pi2 + lambda * dpi;
      const Vec3 rc = F(cand);
      if (rc.norm() < rn) {
        pi2 = cand;
        r = rc;
        rn = rc.norm();
        accepted = true;
        break;
      }
      lambda *= cfg.damping;
    }
    if (!accepted) break;
  }
  if (rn > cfg.tol) {
    throw StepFailure("type-II prediction: Newton did not converge", rn);
  }

  VectorXd q(6);
  q << a.x, pi2;
  const Vec3 x2 = net_eval(net, q).gradS.tail<3>();
  return chart_unlift(ChartPoint{x2, pi2});
}

// ---------------------------------------------------------------------------
// Data generation

struct BoxRegion {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Ones();

  Vec3 sample(Rng& rng) const {
    return Vec3(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()),
                rng.uniform(lo.z(), hi.z()));
  }
  bool empty() const { return !(hi.array() > lo.array()).all(); }
};

/// Spherical shell around a reference radius (used to sample near an orbit).
struct ShellRegion {
  double radius = 1.0;
  double jitter = 0.3;  // relative radius jitter

  Vec3 sample(Rng& rng) const {
    Vec3 dir(rng.normal(), rng.normal(), rng.normal());
    while (dir.norm() < 1e-8) dir = Vec3(rng.normal(), rng.normal(), rng.normal());
    dir.normalize();
    return radius * (1.0 + jitter * (2.0 * rng.uniform01() - 1.0)) * dir;
  }
  bool empty() const { return radius <= 0.0; }
};

/// Sample phase points with chart coordinate and body momentum entries
/// uniform over the boxes, paired by one reconstruct_step of `series`.
inline PhasePairDataset sample_phase_pairs(const GenSeries& series, double dt, long n,
                                           const BoxRegion& x_region, const BoxRegion& mu_region,
                                           std::uint64_t seed, const NewtonConfig& ncfg = {}) {
  PhasePairDataset d;
  d.dt = dt;
  d.meta.generator = "reconstruct-order" + std::to_string(series.order);
  d.meta.seed = seed;
  d.meta.dt = dt;
  Rng rng(seed);
  for (long i = 0; i < n; ++i) {
    const PhasePoint z(cay(x_region.sample(rng)), mu_region.sample(rng));
    try {
      const PhasePoint z2 = reconstruct_step(series, dt, z, ncfg);
      d.in.push_back(z);
      d.out.push_back(z2);
    } catch (const StepFailure&) {
      ++d.meta.rejected;
    }
  }
  return d;
}

/// Near-exact flow pairs on so(3)*: each pair advances dt with the order-7
/// geometric integrator in substeps bounded by dt_sub |mu| / I_min <= 0.3,
/// so large step sizes stay inside the series' convergence region.
template <class Sampler>
MomentumPairDataset sample_flow_pairs(const ReducedHamiltonian& H, double dt, long n,
                                      const Sampler& region, std::uint64_t seed,
                                      const NewtonConfig& ncfg = {}) {
  const GenSeries series = build_series(H, 7);
  const double imin = H.params.inertia.minCoeff();

  MomentumPairDataset d;
  d.dt = dt;
  d.meta.generator = "geometric-flow";
  d.meta.seed = seed;
  d.meta.dt = dt;
  Rng rng(seed);
  for (long i = 0; i < n; ++i) {
    const Vec3 mu0 = region.sample(rng);
    const long subs = std::max<long>(1, std::lround(std::ceil(dt * mu0.norm() / imin / 0.3)));
    Momentum mu = mu0;
    try {
      for (long s = 0; s < subs; ++s) mu = poisson_step(series, dt / subs, mu, ncfg);
      d.in.push_back(mu0);
      d.out.push_back(mu);
    } catch (const StepFailure&) {
      ++d.meta.rejected;
    }
  }
  return d;
}

/// Pairs generated by an arbitrary one-step map on so(3)* (e.g. forward Euler).
template <class Sampler, class Stepper>
MomentumPairDataset sample_map_pairs(Stepper&& step, double dt, long n, const Sampler& region,
                                     std::uint64_t seed, const std::string& generator_id) {
  MomentumPairDataset d;
  d.dt = dt;
  d.meta.generator = generator_id;
  d.meta.seed = seed;
  d.meta.dt = dt;
  Rng rng(seed);
  for (long i = 0; i < n; ++i) {
    const Vec3 mu = region.sample(rng);
    d.in.push_back(mu);
    d.out.push_back(step(mu));
  }
  return d;
}

/// Additive Gaussian noise on the 9 rotation entries (then polar projection
/// back to SO(3)) and on the momentum entries; per-entry variance sigma2.
inline PhasePairDataset perturb_dataset(const PhasePairDataset& d, double sigma2,
                                        std::uint64_t seed) {
  if (sigma2 < 0.0) throw InvalidInput("perturb_dataset: sigma2 must be >= 0");
  if (sigma2 == 0.0) return d;

  const double sigma = std::sqrt(sigma2);
  PhasePairDataset out = d;
  out.meta.noise_sigma2 = sigma2;
  out.meta.extra["noise_seed"] = std::to_string(seed);
  Rng rng(seed);
  auto jiggle = [&](PhasePoint& z) {
    Mat3 gm = z.g.m;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) gm(r, c) += sigma * rng.normal();
    z.g = project_rotation(gm);
    for (int a = 0; a < 3; ++a) z.mu[a] += sigma * rng.normal();
  };
  for (auto& z : out.in) jiggle(z);
  for (auto& z : out.out) jiggle(z);
  return out;
}

/// Train a structure-preserving surrogate of an arbitrary reduced stepper:
/// generate pairs from it, then fit the Poisson model. The surrogate
/// preserves |mu| and coadjoint orbits regardless of the source.
template <class Sampler, class Stepper>
TrainResult geometrize(Stepper&& source, double dt, long n_pairs, const Sampler& region,
                       const ScalarNet& net, const TrainConfig& cfg,
                       const std::string& source_id = "source") {
  if (n_pairs < 1) throw ConfigError("geometrize: need at least one pair");
  if constexpr (requires { region.empty(); }) {
    if (region.empty()) throw ConfigError("geometrize: empty sampling region");
  }
  const MomentumPairDataset d =
      sample_map_pairs(source, dt, n_pairs, region, cfg.seed, source_id);
  return train_poisson(d, net, cfg);
}

}  // namespace lpsim
