#include "ersc/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>

#include "ersc/util.hpp"

namespace ersc {

EigenSolution principal_eigen(const Eigen::SparseMatrix<double, Eigen::RowMajor>& rates,
                              const Vector& outflow, const Vector& r, std::int64_t anchor,
                              const PowerOptions& opts, const Vector* warm_start) {
  const Eigen::Index size = rates.rows();
  const double theta = 1.05 * (outflow.maxCoeff() + std::max(r.maxCoeff(), 0.0));
  const double inv_theta = theta > 0.0 ? 1.0 / theta : 0.0;

  Vector v = warm_start != nullptr ? *warm_start : Vector::Ones(size);
  if (warm_start != nullptr && v[anchor] != 0.0) v /= v[anchor];

  Vector qv(size), y(size);
  double sigma = 1.0;
  int quiet = 0;
  EigenSolution sol;
  sol.anchor = anchor;

  for (std::int64_t iter = 1; iter <= opts.max_iterations; ++iter) {
    qv.noalias() = rates * v;
    y = v + (qv + r.cwiseProduct(v)) * inv_theta;
    const double sigma_new = v.dot(y) / v.dot(v);
    const double drift = std::abs(sigma_new - sigma) / std::max(1.0, std::abs(sigma_new));
    sigma = sigma_new;
    quiet = drift < opts.rayleigh_tol ? quiet + 1 : 0;

    const double pivot = y[anchor];
    if (!(pivot > 0.0)) throw SolverError("power iteration lost positivity at the anchor");
    v = y / pivot;

    if (quiet >= opts.rayleigh_window || iter == opts.max_iterations) {
      const double lam = theta * (sigma - 1.0);
      qv.noalias() = rates * v;
      const double res =
          (qv + r.cwiseProduct(v) - lam * v).lpNorm<Eigen::Infinity>() / v.lpNorm<Eigen::Infinity>();
      if (res <= opts.tol) {
        sol.value = lam;
        sol.eigenfunction = v;
        sol.residual = res;
        sol.iterations = iter;
        return sol;
      }
      quiet = 0;  // Rayleigh settled before the residual did; keep going
    }
  }
  throw SolverError("power iteration did not converge within the iteration cap");
}

Vector cost_vector(const GeneratorMatrix& gen, const SystemN& sys, const LimitParams& p) {
  const std::int64_t size = gen.box.size();
  const int d = p.d;
  Vector r(size);
  for (std::int64_t idx = 0; idx < size; ++idx) {
    const LatticeState x = gen.box.state_of(idx);
    double c = 0.0;
    for (int i = 0; i < d; ++i) {
      c += p.kappa[i] * (x[i] - gen.alloc[static_cast<std::size_t>(idx) * d + i]);
    }
    r[idx] = c / sys.sqrt_n;
  }
  return r;
}

std::int64_t anchor_state(const LatticeBox& box, const SystemN& sys, const LimitParams& p) {
  LatticeState x(p.d);
  for (int i = 0; i < p.d; ++i) {
    x[i] = std::min<int>(box.upper[i], std::max(0, static_cast<int>(std::lround(sys.n * p.rho[i]))));
  }
  return box.index_of(x);
}

EigenSolution prelimit_value(const GeneratorMatrix& gen, const SystemN& sys, const LimitParams& p,
                             const PowerOptions& opts) {
  const Vector r = cost_vector(gen, sys, p);
  return principal_eigen(gen.rates, gen.outflow, r, anchor_state(gen.box, sys, p), opts);
}

void greedy_min_allocation(const LatticeState& x, int n, const std::vector<double>& coef,
                           LatticeState& z) {
  const int d = static_cast<int>(x.size());
  long total = 0;
  for (int i = 0; i < d; ++i) total += x[i];
  long capacity = std::min<long>(total, n);

  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return coef[a] < coef[b]; });

  std::fill(z.begin(), z.end(), 0);
  for (int i : order) {
    const int take = static_cast<int>(std::min<long>(x[i], capacity));
    z[i] = take;
    capacity -= take;
    if (capacity == 0) break;
  }
}

namespace {

/// One exact improvement sweep; returns the number of states whose
/// allocation changed.
std::int64_t improve_policy(const LatticeBox& box, const SystemN& sys, const LimitParams& p,
                            const Vector& V, std::vector<int>& alloc) {
  const int d = p.d;
  const std::int64_t size = box.size();
  std::vector<double> coef(d);
  LatticeState x(d), z(d), y(d);
  std::int64_t changed = 0;

  for (std::int64_t idx = 0; idx < size; ++idx) {
    x = box.state_of(idx);
    y = x;
    const double vx = V[idx];
    for (int i = 0; i < d; ++i) {
      if (x[i] == 0) {
        coef[i] = 0.0;  // z_i forced to 0, coefficient irrelevant
        continue;
      }
      y[i] = x[i] - 1;
      const double diff = V[box.index_of(y)] - vx;
      y[i] = x[i];
      coef[i] = (sys.mu_n[i] - sys.gamma_n[i]) * diff - p.kappa[i] * vx / sys.sqrt_n;
    }
    greedy_min_allocation(x, sys.n, coef, z);
    int* cur = alloc.data() + static_cast<std::size_t>(idx) * d;
    bool same = true;
    for (int i = 0; i < d; ++i) same = same && cur[i] == z[i];
    if (!same) {
      ++changed;
      for (int i = 0; i < d; ++i) cur[i] = z[i];
    }
  }
  return changed;
}

SchedulingPolicy table_policy(const LatticeBox& box, int n, std::vector<int> alloc, int d) {
  SchedulingPolicy policy;
  policy.d = d;
  policy.name = "optimized";
  auto table = std::make_shared<std::vector<int>>(std::move(alloc));
  LatticeBox box_copy = box;
  policy.allocate = [box_copy, table, n, d](const LatticeState& x, LatticeState& z) {
    if (box_copy.contains(x)) {
      const std::int64_t idx = box_copy.index_of(x);
      for (int i = 0; i < d; ++i) z[i] = (*table)[static_cast<std::size_t>(idx) * d + i];
    } else {
      priority_fill(x, n, z);
    }
  };
  return policy;
}

}  // namespace

OptimizeResult prelimit_optimize(const SystemN& sys, const LimitParams& p, const LatticeBox& box,
                                 const PowerOptions& opts, int max_policy_iterations) {
  const int d = p.d;
  const std::int64_t size = box.size();

  // Start from the static priority fill.
  std::vector<int> alloc(static_cast<std::size_t>(size) * d);
  {
    LatticeState x(d), z(d);
    for (std::int64_t idx = 0; idx < size; ++idx) {
      x = box.state_of(idx);
      priority_fill(x, sys.n, z);
      for (int i = 0; i < d; ++i) alloc[static_cast<std::size_t>(idx) * d + i] = z[i];
    }
  }

  OptimizeResult out;
  Vector warm;
  double best = std::numeric_limits<double>::infinity();
  const double decrease_slack = std::max(10.0 * opts.tol, 1e-12);

  for (int step = 0; step < max_policy_iterations; ++step) {
    GeneratorMatrix gen = build_generator(sys, p, table_policy(box, sys.n, alloc, d), box);
    const Vector r = cost_vector(gen, sys, p);
    EigenSolution sol = principal_eigen(gen.rates, gen.outflow, r, anchor_state(box, sys, p), opts,
                                        warm.size() == size ? &warm : nullptr);
    out.value_history.push_back(sol.value);
    if (sol.value > best + decrease_slack) {
      throw SolverError("policy iteration produced an increasing value; cycling suspected");
    }
    best = std::min(best, sol.value);
    warm = sol.eigenfunction;

    const std::int64_t changed = improve_policy(box, sys, p, sol.eigenfunction, alloc);
    const bool value_stable =
        out.value_history.size() >= 2 &&
        std::abs(out.value_history.end()[-1] - out.value_history.end()[-2]) <=
            opts.tol * std::max(1.0, std::abs(sol.value));
    if (changed == 0 || (value_stable && step >= 1)) {
      out.solution = sol;
      out.alloc = alloc;
      out.policy_iterations = step + 1;
      out.policy = table_policy(box, sys.n, std::move(alloc), d);
      return out;
    }
  }
  throw SolverError("policy iteration did not settle within the iteration cap");
}

void write_eigen_solution(std::ostream& os, const EigenSolution& sol, bool dump_eigenfunction) {
  os << "value = " << format_g17(sol.value) << "\n";
  os << "anchor = " << sol.anchor << "\n";
  os << "residual = " << format_g17(sol.residual) << "\n";
  os << "iterations = " << sol.iterations << "\n";
  if (dump_eigenfunction) {
    for (Eigen::Index k = 0; k < sol.eigenfunction.size(); ++k) {
      os << k << " " << format_g17(sol.eigenfunction[k]) << "\n";
    }
  }
}

EigenSolution prelimit_value_under_control(const MarkovControl& v, const SystemN& sys,
                                           const LimitParams& p, const LatticeBox& box,
                                           const PowerOptions& opts) {
  const SchedulingPolicy policy = policy_from_control(v, sys, p);
  const GeneratorMatrix gen = build_generator(sys, p, policy, box);
  return prelimit_value(gen, sys, p, opts);
}

}  // namespace ersc
