#pragma once

// Minimal scalar-MLP stack with nested differentiation.
//
// The training losses contain the network's input gradient dS/dp, so weight
// gradients of the loss are second-order objects. They are computed with a
// forward tangent pass through the network composed with a reverse pass over
// the joint (primal, tangent) computation: for a direction matrix U,
//
//   Sdot = d/de S(X + e U)|_0 = sum_a U_a dS/dp_a,
//
// and reverse-mode on Sdot yields d(U^T gradS)/dW exactly. The same kernel
// also emits input adjoints, giving Hessian-vector products for free.
//
// All batch operations are dense Eigen products with samples as columns;
// accumulation order is fixed, so training is bit-deterministic per seed.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lpsim/error.hpp"
#include "lpsim/rng.hpp"

namespace lpsim {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

/// Feed-forward scalar network: widths = {in, hidden..., 1}, tanh on hidden
/// layers, linear output. Output is C^2 in inputs and weights.
struct ScalarNet {
  std::vector<int> widths;
  std::vector<MatrixXd> W;  // W[l]: widths[l+1] x widths[l]
  std::vector<VectorXd> b;
  std::string activation = "tanh";
  std::uint64_t seed = 0;

  int input_dim() const { return widths.front(); }
  int layer_count() const { return static_cast<int>(W.size()); }

  long param_count() const {
    long n = 0;
    for (std::size_t l = 0; l < W.size(); ++l) n += W[l].size() + b[l].size();
    return n;
  }

  /// Scaled-uniform init with gain 1/sqrt(fan_in); biases zero.
  static ScalarNet create(const std::vector<int>& widths, std::uint64_t seed,
                          const std::string& activation = "tanh") {
    if (widths.size() < 2 || widths.back() != 1) {
      throw ConfigError("ScalarNet: widths must be {in, hidden..., 1}");
    }
    for (int w : widths) {
      if (w < 1) throw ConfigError("ScalarNet: widths must be positive");
    }
    if (activation != "tanh") throw ConfigError("ScalarNet: unsupported activation " + activation);

    ScalarNet net;
    net.widths = widths;
    net.activation = activation;
    net.seed = seed;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const int fan_in = widths[l], fan_out = widths[l + 1];
      MatrixXd w(fan_out, fan_in);
      const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (int r = 0; r < fan_out; ++r) {
        for (int c = 0; c < fan_in; ++c) w(r, c) = rng.uniform(-a, a);
      }
      net.W.push_back(std::move(w));
      net.b.push_back(VectorXd::Zero(fan_out));
    }
    return net;
  }

  VectorXd flatten() const {
    VectorXd v(param_count());
    long off = 0;
    for (std::size_t l = 0; l < W.size(); ++l) {
      for (int c = 0; c < W[l].cols(); ++c) {
        v.segment(off, W[l].rows()) = W[l].col(c);
        off += W[l].rows();
      }
      v.segment(off, b[l].size()) = b[l];
      off += b[l].size();
    }
    return v;
  }

  void set_from_flat(const VectorXd& v) {
    if (v.size() != param_count()) throw InvalidInput("ScalarNet: flat size mismatch");
    long off = 0;
    for (std::size_t l = 0; l < W.size(); ++l) {
      for (int c = 0; c < W[l].cols(); ++c) {
        W[l].col(c) = v.segment(off, W[l].rows());
        off += W[l].rows();
      }
      b[l] = v.segment(off, b[l].size());
      off += b[l].size();
    }
  }
};

struct NetGrads {
  std::vector<MatrixXd> W;
  std::vector<VectorXd> b;

  explicit NetGrads(const ScalarNet& net) {
    for (std::size_t l = 0; l < net.W.size(); ++l) {
      W.push_back(MatrixXd::Zero(net.W[l].rows(), net.W[l].cols()));
      b.push_back(VectorXd::Zero(net.b[l].size()));
    }
  }

  VectorXd flatten() const {
    long n = 0;
    for (std::size_t l = 0; l < W.size(); ++l) n += W[l].size() + b[l].size();
    VectorXd v(n);
    long off = 0;
    for (std::size_t l = 0; l < W.size(); ++l) {
      for (int c = 0; c < W[l].cols(); ++c) {
        v.segment(off, W[l].rows()) = W[l].col(c);
        off += W[l].rows();
      }
      v.segment(off, b[l].size()) = b[l];
      off += b[l].size();
    }
    return v;
  }
};

struct ForwardCache {
  std::vector<MatrixXd> A;  // A[0] = X, A[l+1] = activation(Z[l]); A.back() row = S
  std::vector<MatrixXd> Z;
};

struct TangentCache {
  std::vector<MatrixXd> Adot;  // Adot[0] = U
};

inline ForwardCache net_forward(const ScalarNet& net, const MatrixXd& X) {
  ForwardCache c;
  c.A.push_back(X);
  const int L = net.layer_count();
  for (int l = 0; l < L; ++l) {
    MatrixXd z = (net.W[l] * c.A.back()).colwise() + net.b[l];
    c.Z.push_back(z);
    c.A.push_back(l + 1 < L ? z.array().tanh().matrix() : z);
  }
  return c;
}

/// dS/dX for every sample column (plain reverse pass).
inline MatrixXd net_input_grads(const ScalarNet& net, const ForwardCache& c) {
  const int L = net.layer_count();
  MatrixXd abar = MatrixXd::Ones(1, c.A[0].cols());
  for (int l = L - 1; l >= 0; --l) {
    MatrixXd zbar = l == L - 1
                        ? abar
                        : (abar.array() * (1.0 - c.A[l + 1].array().square())).matrix();
    abar = net.W[l].transpose() * zbar;
  }
  return abar;
}

inline TangentCache net_tangent(const ScalarNet& net, const ForwardCache& c, const MatrixXd& U) {
  TangentCache t;
  t.Adot.push_back(U);
  const int L = net.layer_count();
  for (int l = 0; l < L; ++l) {
    MatrixXd zdot = net.W[l] * t.Adot.back();
    if (l + 1 < L) {
      t.Adot.push_back(((1.0 - c.A[l + 1].array().square()) * zdot.array()).matrix());
    } else {
      t.Adot.push_back(zdot);  // Sdot row
    }
  }
  return t;
}

struct NestedBackResult {
  NetGrads grads;
  MatrixXd input_abar;     // adjoint of X     (= d/dX of the seeded functional)
  MatrixXd input_adotbar;  // adjoint of U

  explicit NestedBackResult(const ScalarNet& net) : grads(net) {}
};

/// Reverse pass over the joint (primal, tangent) computation. Seeds are the
/// cotangents of the primal output row S and the tangent output row Sdot.
/// With adotbar_L = 0 this is plain backprop for sum_i abar_i S_i; with
/// adotbar_L = 1 it adds the weight gradient of sum_i Sdot_i = U^T gradS.
inline NestedBackResult net_nested_backward(const ScalarNet& net, const ForwardCache& c,
                                            const TangentCache& t, const RowVectorXd& abar_seed,
                                            const RowVectorXd& adotbar_seed) {
  NestedBackResult out(net);
  const int L = net.layer_count();
  MatrixXd abar = abar_seed;
  MatrixXd adotbar = adotbar_seed;
  for (int l = L - 1; l >= 0; --l) {
    MatrixXd zbar, zdotbar;
    if (l == L - 1) {
      zbar = abar;
      zdotbar = adotbar;
    } else {
      const MatrixXd zdot = net.W[l] * t.Adot[l];
      const auto a = c.A[l + 1].array();   // tanh(z)
      const auto sp = (1.0 - a.square());  // sigma'
      // sigma'' = -2 a sigma'
      zbar = (abar.array() * sp + adotbar.array() * (-2.0 * a * sp) * zdot.array()).matrix();
      zdotbar = (adotbar.array() * sp).matrix();
    }
    out.grads.W[l] += zbar * c.A[l].transpose() + zdotbar * t.Adot[l].transpose();
    out.grads.b[l] += zbar.rowwise().sum();
    abar = net.W[l].transpose() * zbar;
    adotbar = net.W[l].transpose() * zdotbar;
  }
  out.input_abar = abar;
  out.input_adotbar = adotbar;
  return out;
}

// ---------------------------------------------------------------------------
// Single-point wrappers

struct NetEval {
  double S;
  VectorXd gradS;
};

inline NetEval net_eval(const ScalarNet& net, const VectorXd& p) {
  const ForwardCache c = net_forward(net, p);
  return NetEval{c.A.back()(0, 0), net_input_grads(net, c).col(0)};
}

struct NetParamGrads {
  VectorXd dS_dW;    // flat layout matching ScalarNet::flatten
  MatrixXd dgrad_dW; // input_dim x param_count
};

inline NetParamGrads net_param_grads(const ScalarNet& net, const VectorXd& p) {
  const ForwardCache c = net_forward(net, p);
  NetParamGrads out;
  {
    const MatrixXd zero_u = MatrixXd::Zero(p.size(), 1);
    const TangentCache t = net_tangent(net, c, zero_u);
    out.dS_dW = net_nested_backward(net, c, t, RowVectorXd::Ones(1), RowVectorXd::Zero(1))
                    .grads.flatten();
  }
  out.dgrad_dW.resize(p.size(), net.param_count());
  for (int a = 0; a < p.size(); ++a) {
    MatrixXd u = MatrixXd::Zero(p.size(), 1);
    u(a, 0) = 1.0;
    const TangentCache t = net_tangent(net, c, u);
    out.dgrad_dW.row(a) =
        net_nested_backward(net, c, t, RowVectorXd::Zero(1), RowVectorXd::Ones(1))
            .grads.flatten()
            .transpose();
  }
  return out;
}

/// Hessian-vector product d/dp (u^T dS/dp).
inline VectorXd net_hess_vec(const ScalarNet& net, const VectorXd& p, const VectorXd& u) {
  const ForwardCache c = net_forward(net, p);
  const TangentCache t = net_tangent(net, c, u);
  return net_nested_backward(net, c, t, RowVectorXd::Zero(1), RowVectorXd::Ones(1))
      .input_abar.col(0);
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(long n_params, const AdamConfig& cfg)
      : cfg_(cfg), m_(VectorXd::Zero(n_params)), v_(VectorXd::Zero(n_params)) {}

  void step(VectorXd& params, const VectorXd& grad) {
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_.array().matrix() + (1.0 - cfg_.beta2) * grad.array().square().matrix();
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    params -= (cfg_.lr * (m_ / bc1).array() / ((v_ / bc2).array().sqrt() + cfg_.eps)).matrix();
  }

 private:
  AdamConfig cfg_;
  VectorXd m_, v_;
  long t_ = 0;
};

}  // namespace lpsim
