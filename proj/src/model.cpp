#include "ersc/model.hpp"

#include <cmath>
#include <sstream>

#include "ersc/util.hpp"

namespace ersc {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

std::string dim_msg(const char* name, Eigen::Index got, int want) {
  std::ostringstream os;
  os << name << " has dimension " << got << ", expected " << want;
  return os.str();
}

}  // namespace

LimitParams LimitParams::create(const Vector& lambda, const Vector& lambda_hat, const Vector& mu,
                                const Vector& mu_hat, const Vector& gamma, const Vector& kappa) {
  LimitParams p;
  p.d = static_cast<int>(lambda.size());
  require(p.d >= 1, "class count must be at least 1");
  require(lambda_hat.size() == p.d, dim_msg("lambda_hat", lambda_hat.size(), p.d));
  require(mu.size() == p.d, dim_msg("mu", mu.size(), p.d));
  require(mu_hat.size() == p.d, dim_msg("mu_hat", mu_hat.size(), p.d));
  require(gamma.size() == p.d, dim_msg("gamma", gamma.size(), p.d));
  require(kappa.size() == p.d, dim_msg("kappa", kappa.size(), p.d));
  for (int i = 0; i < p.d; ++i) {
    require(lambda[i] > 0.0, "lambda must be strictly positive");
    require(mu[i] > 0.0, "mu must be strictly positive");
    require(gamma[i] > 0.0, "gamma must be strictly positive");
    require(kappa[i] >= 0.0, "kappa must be nonnegative");
  }
  p.lambda = lambda;
  p.lambda_hat = lambda_hat;
  p.mu = mu;
  p.mu_hat = mu_hat;
  p.gamma = gamma;
  p.kappa = kappa;
  p.rho = lambda.cwiseQuotient(mu);
  require(std::abs(p.rho.sum() - 1.0) <= 1e-12, "load fractions must sum to 1");
  p.ell_drift = lambda_hat - p.rho.cwiseProduct(mu_hat);
  p.ell = p.ell_drift.cwiseQuotient(mu);
  p.rho_hat = -p.ell.sum();
  return p;
}

Vector LimitParams::sigma_diag() const { return (2.0 * lambda).cwiseSqrt(); }

SystemN SystemN::embed(const LimitParams& p, int n) {
  if (n < 1) throw ConfigError("server count must be positive");
  SystemN s;
  s.n = n;
  s.sqrt_n = std::sqrt(static_cast<double>(n));
  s.lambda_n = static_cast<double>(n) * p.lambda + s.sqrt_n * p.lambda_hat;
  s.mu_n = p.mu + p.mu_hat / s.sqrt_n;
  s.gamma_n = p.gamma;
  for (int i = 0; i < p.d; ++i) {
    if (s.lambda_n[i] <= 0.0 || s.mu_n[i] <= 0.0) {
      throw ConfigError("embedded rates nonpositive at n=" + std::to_string(n) +
                        "; second-order terms too large for this n");
    }
  }
  s.ell_n = (s.lambda_n - static_cast<double>(n) * p.lambda) / s.sqrt_n -
            s.sqrt_n * p.rho.cwiseProduct(s.mu_n - p.mu);
  return s;
}

SystemN SystemN::raw(int n, Vector lambda_n, Vector mu_n, Vector gamma_n, Vector ell_n) {
  SystemN s;
  s.n = n;
  s.sqrt_n = std::sqrt(static_cast<double>(n));
  s.lambda_n = std::move(lambda_n);
  s.mu_n = std::move(mu_n);
  s.gamma_n = std::move(gamma_n);
  s.ell_n = std::move(ell_n);
  return s;
}

bool is_simplex_point(const Vector& u, double tol) {
  if (u.size() == 0) return false;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (u[i] < 0.0) return false;
  }
  return std::abs(u.sum() - 1.0) <= tol;
}

Vector simplex_vertex(int d, int i) {
  Vector u = Vector::Zero(d);
  u[i] = 1.0;
  return u;
}

MarkovControl MarkovControl::constant(const Vector& u, double radius, bool continuous) {
  MarkovControl v;
  v.frozen_value = u;
  v.frozen_radius = radius;
  v.continuous = continuous;
  v.map = [u](const Vector&) { return u; };
  return v;
}

Vector drift(const Vector& x, const Vector& u, const LimitParams& p) {
  if (x.size() != p.d || u.size() != p.d) throw ConfigError("drift: dimension mismatch");
  const double pos = std::max(x.sum(), 0.0);
  return p.ell_drift - p.mu.cwiseProduct(x - pos * u) - pos * p.gamma.cwiseProduct(u);
}

double running_cost(const Vector& x, const Vector& u, const LimitParams& p) {
  const double pos = std::max(x.sum(), 0.0);
  return pos * p.kappa.dot(u);
}

bool action_feasible(const LatticeState& x, const LatticeState& z, int n) {
  if (x.size() != z.size()) return false;
  long total_x = 0;
  long total_z = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (z[i] < 0 || z[i] > x[i]) return false;
    total_x += x[i];
    total_z += z[i];
  }
  return total_z == std::min<long>(total_x, n);
}

Vector control_from_allocation(const Vector& xhat, const Vector& zhat) {
  const int d = static_cast<int>(xhat.size());
  const double head = xhat.sum();
  if (head <= 0.0) return simplex_vertex(d, d - 1);
  return (xhat - zhat) / head;
}

LatticeState round_to_lattice(const Vector& z) {
  const int d = static_cast<int>(z.size());
  double total = 0.0;
  for (int i = 0; i < d; ++i) {
    if (z[i] < 0.0) throw ConfigError("round_to_lattice: negative coordinate");
    total += z[i];
  }
  const double nearest = std::round(total);
  if (std::abs(total - nearest) > 1e-9) {
    throw ConfigError("round_to_lattice: coordinate sum is not an integer");
  }
  const long sum = static_cast<long>(nearest);
  LatticeState out(d);
  long floor_sum = 0;
  for (int i = 0; i < d; ++i) {
    out[i] = static_cast<int>(std::floor(z[i]));
    floor_sum += out[i];
  }
  out[d - 1] += static_cast<int>(sum - floor_sum);  // fractional mass, an integer by construction
  return out;
}

void priority_fill(const LatticeState& x, int n, LatticeState& z) {
  int remaining = n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const int take = std::min(x[i], std::max(remaining, 0));
    z[i] = take;
    remaining -= take;
  }
}

SchedulingPolicy policy_from_control(const MarkovControl& v, const SystemN& sys,
                                     const LimitParams& p) {
  const int d = p.d;
  const int n = sys.n;
  const double bound = v.frozen_radius * sys.sqrt_n;

  {
    // Exhaustive feasibility check over the freeze box: the rounded queue
    // vector must fit under the headcounts at every state the first branch
    // can see.
    std::vector<int> lo(d), hi(d);
    for (int i = 0; i < d; ++i) {
      lo[i] = std::max(0, static_cast<int>(std::ceil(p.rho[i] * n - bound)));
      hi[i] = static_cast<int>(std::floor(p.rho[i] * n + bound));
      if (hi[i] < lo[i]) throw ConfigError("freeze box empty; n too small");
    }
    std::vector<int> x = lo;
    Vector xhat(d);
    bool more = true;
    while (more) {
      long total = 0;
      for (int i = 0; i < d; ++i) total += x[i];
      const double excess = static_cast<double>(std::max<long>(total - n, 0));
      if (excess > 0.0) {
        for (int i = 0; i < d; ++i) xhat[i] = (static_cast<double>(x[i]) - n * p.rho[i]) / sys.sqrt_n;
        const LatticeState q = round_to_lattice(excess * v(xhat));
        for (int i = 0; i < d; ++i) {
          if (q[i] > x[i]) {
            throw SolverError("scheduling policy infeasible inside the freeze box; "
                              "n too small for the control's freeze radius");
          }
        }
      }
      int axis = d - 1;
      while (axis >= 0) {
        if (++x[axis] <= hi[axis]) break;
        x[axis] = lo[axis];
        --axis;
      }
      more = axis >= 0;
    }
  }

  SchedulingPolicy policy;
  policy.d = d;
  policy.name = "scp";
  policy.allocate = [d, n, bound, v, sys, p](const LatticeState& x, LatticeState& z) {
    bool inside = true;  // max_i |x_i - rho_i n| <= K sqrt(n); ties stay inside
    long total = 0;
    for (int i = 0; i < d; ++i) {
      total += x[i];
      if (std::abs(static_cast<double>(x[i]) - p.rho[i] * n) > bound) inside = false;
    }
    if (!inside) {
      priority_fill(x, n, z);
      return;
    }
    const double excess = static_cast<double>(std::max<long>(total - n, 0));
    Vector xhat(d);
    for (int i = 0; i < d; ++i) xhat[i] = (static_cast<double>(x[i]) - n * p.rho[i]) / sys.sqrt_n;
    const LatticeState q = round_to_lattice(excess * v(xhat));
    for (int i = 0; i < d; ++i) {
      z[i] = x[i] - q[i];
      if (z[i] < 0) {
        throw SolverError("scheduling policy infeasible at a box state; n too small "
                          "for the control's freeze radius");
      }
    }
  };
  return policy;
}

Vector scale_state(const LatticeState& x, const SystemN& sys, const LimitParams& p) {
  Vector xhat(p.d);
  for (int i = 0; i < p.d; ++i) {
    xhat[i] = (static_cast<double>(x[i]) - sys.n * p.rho[i]) / sys.sqrt_n;
  }
  return xhat;
}

LatticeState unscale_state(const Vector& xhat, const SystemN& sys, const LimitParams& p) {
  LatticeState x(p.d);
  for (int i = 0; i < p.d; ++i) {
    x[i] = static_cast<int>(std::lround(sys.n * p.rho[i] + sys.sqrt_n * xhat[i]));
  }
  return x;
}

}  // namespace ersc
