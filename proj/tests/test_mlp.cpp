#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lpsim/mlp.hpp"
#include "test_util.hpp"

using namespace lpsim;

namespace {

VectorXd random_input(Rng& rng, int dim, double lo = -1.5, double hi = 1.5) {
  VectorXd p(dim);
  for (int i = 0; i < dim; ++i) p[i] = rng.uniform(lo, hi);
  return p;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("degenerate nets") {
  SECTION("zero weights: constant bias path, zero input gradient") {
    ScalarNet net = ScalarNet::create({3, 4, 1}, 1);
    for (auto& w : net.W) w.setZero();
    net.b[1][0] = 2.5;  // output bias
    const NetEval e = net_eval(net, Vec3(0.3, -0.2, 0.9));
    REQUIRE(e.S == 2.5);
    REQUIRE(e.gradS.norm() == 0.0);
  }

  SECTION("single linear layer: gradS = w exactly") {
    ScalarNet net = ScalarNet::create({3, 1}, 2);
    net.W[0] << 0.5, -1.25, 2.0;
    net.b[0][0] = 0.75;
    const NetEval e = net_eval(net, Vec3(1.0, 2.0, 3.0));
    REQUIRE(e.S == Catch::Approx(0.5 - 2.5 + 6.0 + 0.75).epsilon(1e-15));
    REQUIRE((e.gradS - Vec3(0.5, -1.25, 2.0)).norm() == 0.0);
  }

  SECTION("invalid architectures are rejected") {
    REQUIRE_THROWS_AS(ScalarNet::create({3}, 0), ConfigError);
    REQUIRE_THROWS_AS(ScalarNet::create({3, 4, 2}, 0), ConfigError);
    REQUIRE_THROWS_AS(ScalarNet::create({3, 0, 1}, 0), ConfigError);
    REQUIRE_THROWS_AS(ScalarNet::create({3, 4, 1}, 0, "relu"), ConfigError);
  }
}

TEST_CASE("input gradients match finite differences") {
  Rng rng(81);
  const ScalarNet net = ScalarNet::create({3, 8, 8, 1}, 42);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXd p = random_input(rng, 3);
    const NetEval e = net_eval(net, p);
    for (int a = 0; a < 3; ++a) {
      VectorXd pp = p, pm = p;
      pp[a] += h;
      pm[a] -= h;
      const double fd = (net_eval(net, pp).S - net_eval(net, pm).S) / (2 * h);
      REQUIRE(rel_err(e.gradS[a], fd) < 1e-6);
    }
  }
}

TEST_CASE("nested weight gradients match finite differences") {
  Rng rng(83);
  const ScalarNet net = ScalarNet::create({3, 6, 5, 1}, 7);
  const VectorXd p = random_input(rng, 3);
  const NetParamGrads pg = net_param_grads(net, p);
  const VectorXd theta = net.flatten();
  const double h = 1e-6;

  // probe a deterministic sample of parameter indices
  const long n = net.param_count();
  for (long k = 0; k < n; k += std::max<long>(1, n / 25)) {
    ScalarNet pert = net;
    VectorXd tp = theta, tm = theta;
    tp[k] += h;
    tm[k] -= h;

    pert.set_from_flat(tp);
    const NetEval ep = net_eval(pert, p);
    pert.set_from_flat(tm);
    const NetEval em = net_eval(pert, p);

    REQUIRE(rel_err(pg.dS_dW[k], (ep.S - em.S) / (2 * h)) < 1e-6);
    for (int a = 0; a < 3; ++a) {
      REQUIRE(rel_err(pg.dgrad_dW(a, k), (ep.gradS[a] - em.gradS[a]) / (2 * h)) < 1e-5);
    }
  }
}

TEST_CASE("hessian-vector products match finite differences") {
  Rng rng(85);
  const ScalarNet net = ScalarNet::create({3, 8, 1}, 11);
  const double h = 1e-6;
  for (int trial = 0; trial < 10; ++trial) {
    const VectorXd p = random_input(rng, 3);
    const VectorXd u = random_input(rng, 3);
    const VectorXd hv = net_hess_vec(net, p, u);
    const VectorXd fd =
        (net_eval(net, p + h * u).gradS - net_eval(net, (p - h * u).eval()).gradS) / (2 * h);
    REQUIRE((hv - fd).norm() < 1e-5 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("flat layout round-trip leaves gradients unchanged") {
  Rng rng(87);
  ScalarNet net = ScalarNet::create({3, 5, 1}, 3);
  const VectorXd p = random_input(rng, 3);
  const NetParamGrads before = net_param_grads(net, p);

  ScalarNet copy = ScalarNet::create({3, 5, 1}, 999);
  copy.set_from_flat(net.flatten());
  const NetParamGrads after = net_param_grads(copy, p);

  REQUIRE((before.dS_dW - after.dS_dW).norm() == 0.0);
  REQUIRE((before.dgrad_dW - after.dgrad_dW).norm() == 0.0);
}

TEST_CASE("batched kernel equals per-sample evaluation") {
  Rng rng(89);
  const ScalarNet net = ScalarNet::create({3, 7, 1}, 5);
  const int N = 6;
  MatrixXd X(3, N), U(3, N);
  for (int i = 0; i < N; ++i) {
    X.col(i) = random_input(rng, 3);
    U.col(i) = random_input(rng, 3);
  }

  const ForwardCache c = net_forward(net, X);
  const MatrixXd G = net_input_grads(net, c);
  const TangentCache t = net_tangent(net, c, U);
  const NestedBackResult joint =
      net_nested_backward(net, c, t, RowVectorXd::Zero(N), RowVectorXd::Ones(N));

  VectorXd sum_single = VectorXd::Zero(net.param_count());
  for (int i = 0; i < N; ++i) {
    const NetEval e = net_eval(net, X.col(i));
    REQUIRE((G.col(i) - e.gradS).norm() < 1e-14);
    sum_single += net_param_grads(net, X.col(i)).dgrad_dW.transpose() * U.col(i);
  }
  REQUIRE((joint.grads.flatten() - sum_single).norm() < 1e-11 * std::max(1.0, sum_single.norm()));
}

TEST_CASE("adam") {
  SECTION("deterministic given identical inputs") {
    const ScalarNet a = ScalarNet::create({3, 16, 1}, 123);
    const ScalarNet b = ScalarNet::create({3, 16, 1}, 123);
    REQUIRE((a.flatten() - b.flatten()).norm() == 0.0);

    AdamConfig cfg;
    Adam opt1(a.param_count(), cfg), opt2(a.param_count(), cfg);
    VectorXd p1 = a.flatten(), p2 = b.flatten();
    Rng rng(91);
    for (int i = 0; i < 50; ++i) {
      VectorXd g(p1.size());
      for (int k = 0; k < g.size(); ++k) g[k] = rng.uniform(-1, 1);
      opt1.step(p1, g);
      opt2.step(p2, g);
    }
    REQUIRE((p1 - p2).norm() == 0.0);
  }

  SECTION("minimizes a quadratic") {
    const VectorXd target = Vec3(1.0, -2.0, 0.5);
    VectorXd w = Vec3::Zero();
    AdamConfig cfg;
    cfg.lr = 0.05;
    Adam opt(3, cfg);
    for (int i = 0; i < 2000; ++i) {
      opt.step(w, 2.0 * (w - target));
    }
    REQUIRE((w - target).norm() < 1e-6);
  }
}
