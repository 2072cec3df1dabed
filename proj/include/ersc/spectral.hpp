#ifndef ERSC_SPECTRAL_HPP
#define ERSC_SPECTRAL_HPP

#include <Eigen/SparseCore>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ersc/ctmc.hpp"
#include "ersc/model.hpp"

namespace ersc {

/// Principal eigenpair of Q + diag(r): the risk-sensitive value of the
/// truncated chain and its positive eigenfunction, normalized to 1 at the
/// anchor state (the box state nearest the nominal load point).
struct EigenSolution {
  double value = 0.0;
  Vector eigenfunction;
  std::int64_t anchor = 0;
  double residual = 0.0;  // ||(Q + diag(r)) V - value V||_inf / ||V||_inf
  std::int64_t iterations = 0;
};

struct PowerOptions {
  double tol = 1e-9;                       // residual tolerance
  std::int64_t max_iterations = 1000000;   // hard cap
  double rayleigh_tol = 1e-10;             // per-iteration relative drift
  int rayleigh_window = 50;                // consecutive quiet iterations required
};

/// Uniformized power iteration on M = I + (Q + diag(r)) / Theta with
/// Theta = 1.05 (max outflow + max r); returns Theta (sigma - 1). The
/// warm start, when given, must be strictly positive.
EigenSolution principal_eigen(const Eigen::SparseMatrix<double, Eigen::RowMajor>& rates,
                              const Vector& outflow, const Vector& r, std::int64_t anchor,
                              const PowerOptions& opts, const Vector* warm_start = nullptr);

/// Running cost per box state under the generator's allocation:
/// kappa . (x - z) / sqrt(n).
Vector cost_vector(const GeneratorMatrix& gen, const SystemN& sys, const LimitParams& p);

std::int64_t anchor_state(const LatticeBox& box, const SystemN& sys, const LimitParams& p);

/// Risk-sensitive value of a fixed policy on a box.
EigenSolution prelimit_value(const GeneratorMatrix& gen, const SystemN& sys, const LimitParams& p,
                             const PowerOptions& opts = {});

struct OptimizeResult {
  EigenSolution solution;
  std::vector<int> alloc;               // optimal allocation per box state, flattened
  std::vector<double> value_history;    // one entry per policy-evaluation step
  int policy_iterations = 0;
  SchedulingPolicy policy;              // table lookup inside the box, priority fill outside
};

/// Policy iteration over allocations: evaluation by principal_eigen, greedy
/// exact improvement of the linear-in-z objective, values non-increasing
/// across steps.
OptimizeResult prelimit_optimize(const SystemN& sys, const LimitParams& p, const LatticeBox& box,
                                 const PowerOptions& opts = {}, int max_policy_iterations = 200);

/// Value of the policy constructed from a Markov control.
EigenSolution prelimit_value_under_control(const MarkovControl& v, const SystemN& sys,
                                           const LimitParams& p, const LatticeBox& box,
                                           const PowerOptions& opts = {});

/// Exact minimizer of sum_i coef_i z_i over {0 <= z <= x, e.z = (e.x) /\ n}:
/// greedy capacity assignment sorted on the per-class coefficients, ties to
/// the lowest class index.
void greedy_min_allocation(const LatticeState& x, int n, const std::vector<double>& coef,
                           LatticeState& z);

/// Structured text record (value, anchor, residual, iterations), optionally
/// followed by the eigenfunction in box enumeration order.
void write_eigen_solution(std::ostream& os, const EigenSolution& sol,
                          bool dump_eigenfunction = false);

}  // namespace ersc

#endif  // ERSC_SPECTRAL_HPP
