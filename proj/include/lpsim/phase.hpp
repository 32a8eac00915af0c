#pragma once

// Left-trivialized phase space T*SO(3) ~ SO(3) x so(3)*, momentum maps,
// rigid-body Hamiltonians and the reference continuous dynamics.
//
// A cotangent point is stored as (g, mu) with mu the body momentum, so
//   J_R(g, mu) = mu,   J_L(g, mu) = Ad*_g mu = g mu,
// and the lifted left action is h . (g, mu) = (h g, mu).

#include <Eigen/Dense>

#include "lpsim/error.hpp"
#include "lpsim/so3.hpp"

namespace lpsim {

struct PhasePoint {
  Rotation g;
  Momentum mu = Momentum::Zero();

  PhasePoint() = default;
  PhasePoint(const Rotation& g_, const Momentum& mu_) : g(g_), mu(mu_) {}
};

struct RigidBodyParams {
  Vec3 inertia{1.5, 2.0, 2.5};

  RigidBodyParams() = default;
  explicit RigidBodyParams(const Vec3& i) : inertia(i) {
    if (!(inertia.array() > 0.0).all()) {
      throw InvalidInput("RigidBodyParams: inertia components must be positive");
    }
  }
};

/// H^red(p) = 1/2 (p1^2/I1 + p2^2/I2 + p3^2/I3) on so(3)*.
struct ReducedHamiltonian {
  RigidBodyParams params;

  ReducedHamiltonian() = default;
  explicit ReducedHamiltonian(const RigidBodyParams& p) : params(p) {}
  explicit ReducedHamiltonian(const Vec3& inertia) : params(inertia) {}

  double operator()(const Momentum& p) const {
    return 0.5 * (p.array().square() / params.inertia.array()).sum();
  }
  Vec3 grad(const Momentum& p) const { return p.array() / params.inertia.array(); }
};

inline Momentum j_left(const PhasePoint& z) { return coadjoint(z.g, z.mu); }
inline Momentum j_right(const PhasePoint& z) { return z.mu; }

inline PhasePoint left_translate(const Rotation& h, const PhasePoint& z) {
  return PhasePoint(h * z.g, z.mu);
}

/// Lie-Poisson (Euler) equations on so(3)*: mu' = mu x grad H(mu).
/// The sign is fixed by exact conservation of J_L = g mu under g' = g hat(grad H).
inline Momentum reduced_vector_field(const ReducedHamiltonian& H, const Momentum& mu) {
  return mu.cross(H.grad(mu));
}

struct PhaseTangent {
  Mat3 g_dot;
  Vec3 mu_dot;
};

/// Left-trivialized Hamilton equations for H = H^red o J_R:
///   g' = g hat(grad H(mu)),  mu' = mu x grad H(mu).
/// Along the flow, d/dt J_L = g (grad H x mu + mu x grad H) = 0.
inline PhaseTangent full_vector_field(const ReducedHamiltonian& H, const PhasePoint& z) {
  const Vec3 w = H.grad(z.mu);
  return PhaseTangent{z.g.m * hat(w), z.mu.cross(w)};
}

}  // namespace lpsim
