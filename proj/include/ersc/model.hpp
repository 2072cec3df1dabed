#ifndef ERSC_MODEL_HPP
#define ERSC_MODEL_HPP

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace ersc {

using Vector = Eigen::VectorXd;
using LatticeState = std::vector<int>;

/// Halfin-Whitt parameter set for the d-class V network: first- and
/// second-order arrival/service terms, abandonment rates and cost weights,
/// together with the derived load fractions and drift constants.
///
/// Construction enforces sum(rho) == 1 (critical load), strict positivity of
/// the rates, and the identity rho_hat == -sum(ell).
struct LimitParams {
  int d = 0;
  Vector lambda;      // limiting arrival rates, > 0
  Vector lambda_hat;  // second-order arrival terms
  Vector mu;          // limiting service rates, > 0
  Vector mu_hat;      // second-order service terms
  Vector gamma;       // abandonment rates, > 0
  Vector kappa;       // cost weights, >= 0

  // Derived.
  Vector rho;        // lambda_i / mu_i
  Vector ell;        // (lambda_hat_i - rho_i * mu_hat_i) / mu_i; satisfies e.ell = -rho_hat
  Vector ell_drift;  // lambda_hat_i - rho_i * mu_hat_i, the constant drift term of the
                     // scaled dynamics (the n-free value of SystemN::ell_n); equals ell
                     // whenever mu_i = 1 or the second-order terms vanish
  double rho_hat = 0.0;

  static LimitParams create(const Vector& lambda, const Vector& lambda_hat, const Vector& mu,
                            const Vector& mu_hat, const Vector& gamma, const Vector& kappa);

  /// Noise coefficient of the limiting diffusion: diag(sqrt(2 lambda_i)).
  Vector sigma_diag() const;
};

/// Finite-n system under the canonical embedding
///   lambda^n_i = n lambda_i + sqrt(n) lambda_hat_i,
///   mu^n_i     = mu_i + mu_hat_i / sqrt(n),
///   gamma^n_i  = gamma_i,
/// which satisfies the Halfin-Whitt limits exactly. Rejects n for which any
/// embedded rate is nonpositive.
struct SystemN {
  int n = 0;
  Vector lambda_n;
  Vector mu_n;
  Vector gamma_n;
  Vector ell_n;  // (lambda^n_i - n lambda_i)/sqrt(n) - rho_i sqrt(n)(mu^n_i - mu_i)
  double sqrt_n = 0.0;

  static SystemN embed(const LimitParams& p, int n);

  /// Unchecked constructor for synthetic test fixtures (e.g. zero-rate systems).
  static SystemN raw(int n, Vector lambda_n, Vector mu_n, Vector gamma_n, Vector ell_n);
};

/// Point of the control simplex {u >= 0, sum u = 1}.
bool is_simplex_point(const Vector& u, double tol = 1e-12);
Vector simplex_vertex(int d, int i);

/// Markov control map R^d -> simplex, frozen to a fixed vertex value outside
/// a ball of radius K. Evaluation enforces the freeze exactly.
struct MarkovControl {
  std::function<Vector(const Vector&)> map;
  Vector frozen_value;          // u0
  double frozen_radius = 0.0;   // K
  bool continuous = false;

  Vector operator()(const Vector& x) const {
    if (x.norm() > frozen_radius) return frozen_value;
    return map(x);
  }

  static MarkovControl constant(const Vector& u, double radius, bool continuous = true);
};

/// State-to-allocation map for the n-server system. `allocate` must return a
/// member of the feasible action set at every reachable state.
struct SchedulingPolicy {
  int d = 0;
  std::string name;
  std::function<void(const LatticeState& x, LatticeState& z)> allocate;

  LatticeState operator()(const LatticeState& x) const {
    LatticeState z(x.size());
    allocate(x, z);
    return z;
  }
};

// --- Operations ------------------------------------------------------------

/// Drift of the limiting diffusion: ell - R(x - (e.x)^+ u) - (e.x)^+ Gamma u
/// with R = diag(mu), Gamma = diag(gamma).
Vector drift(const Vector& x, const Vector& u, const LimitParams& p);

/// Running cost kappa . ((e.x)^+ u), nonnegative and affine in u.
double running_cost(const Vector& x, const Vector& u, const LimitParams& p);

/// Membership in the action set: 0 <= z <= x and e.z = (e.x) /\ n.
bool action_feasible(const LatticeState& x, const LatticeState& z, int n);

/// Control read off a scaled (state, allocation) pair: (xhat - zhat) / (e.xhat)^+
/// when the scaled headcount is positive, last vertex otherwise.
Vector control_from_allocation(const Vector& xhat, const Vector& zhat);

/// Integerizes a nonnegative vector with integer coordinate sum: floors all
/// but the last coordinate and pushes the fractional mass into the last one.
/// Preserves the coordinate sum; moves no coordinate by more than 2d. Sums
/// within 1e-9 of an integer are snapped, larger deviations are errors.
LatticeState round_to_lattice(const Vector& z);

/// Work-conserving scheduling policy built from a continuous Markov control:
/// inside the box {max_i |x_i - rho_i n| <= K sqrt(n)} the queue vector is
/// round_to_lattice((e.x - n)^+ v(xhat)); outside, servers fill classes in
/// index order. Throws if the construction is infeasible at some state
/// (n too small for the control's freeze radius).
SchedulingPolicy policy_from_control(const MarkovControl& v, const SystemN& sys,
                                     const LimitParams& p);

/// Static priority fill z_i = x_i /\ (n - sum_{j<i} x_j)^+ in class order.
void priority_fill(const LatticeState& x, int n, LatticeState& z);

/// Diffusion scaling xhat_i = (x_i - n rho_i) / sqrt(n) and its inverse.
Vector scale_state(const LatticeState& x, const SystemN& sys, const LimitParams& p);
LatticeState unscale_state(const Vector& xhat, const SystemN& sys, const LimitParams& p);

}  // namespace ersc

#endif  // ERSC_MODEL_HPP
