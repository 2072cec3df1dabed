#ifndef ERSC_VARIATIONAL_HPP
#define ERSC_VARIATIONAL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ersc/ctmc.hpp"
#include "ersc/model.hpp"

namespace ersc {

/// Relative entropy rate of a rate-r Poisson clock against a rate-1 clock:
/// r ln r - r + 1, extended by continuity to 1 at r = 0. Convex, nonnegative,
/// zero only at r = 1.
double poisson_kl(double r);

/// Quadratic lower bounds on poisson_kl(1 + r):
///   first:  r in (-1, 0]      =>  poisson_kl(1+r) >= r^2 / 2
///   second: r in [0, l)       =>  poisson_kl(1+r) >= r^2 / (2 (1+l))
/// Each flag reports whether the corresponding inequality holds (vacuously
/// true outside its range).
std::pair<bool, bool> poisson_kl_bounds(double r, double l);

// --- Controlled diffusion paths ---------------------------------------------

/// Uniform-mesh sample path of the (extended) diffusion with trapezoidal
/// running-cost and control-energy integrals.
struct DiffusionPath {
  double dt = 0.0;
  std::vector<double> t;
  Eigen::MatrixXd x;  // (steps + 1) x d
  double cost_integral = 0.0;    // int r(X, v(X)) dt
  double energy_integral = 0.0;  // int 0.5 ||w||^2 dt
};

/// Euler-Maruyama with an arbitrary drift callable; the model-facing
/// simulators below wrap this. `w` adds Sigma w dt to the drift.
DiffusionPath euler_path(const std::function<Vector(const Vector&)>& drift_fn,
                         const Vector& sigma_diag, const TiltFunction* w, const Vector& x0,
                         double horizon, double dt, std::uint64_t seed,
                         const std::function<double(const Vector&)>& cost_fn);

DiffusionPath simulate_diffusion(const MarkovControl& v, const LimitParams& p, const Vector& x0,
                                 double horizon, double dt, std::uint64_t seed);

/// dX = b(X, v(X)) dt + Sigma w dt + Sigma dW; with w == 0 this is the plain
/// controlled diffusion under matched randomness.
DiffusionPath simulate_extended_diffusion(const MarkovControl& v, const TiltFunction& w,
                                          const LimitParams& p, const Vector& x0, double horizon,
                                          double dt, std::uint64_t seed);

// --- Monte Carlo certificates --------------------------------------------------

/// Bounded functional of a scalar mesh path. The raw value is clamped to
/// [-clip, clip]; the clip realizes the boundedness hypothesis of the
/// representations and its value is part of the record.
struct ScalarPathFunctional {
  std::string name;
  std::function<double(const std::vector<double>& t, const std::vector<double>& path)> raw;
  double clip = 1e100;

  double operator()(const std::vector<double>& t, const std::vector<double>& path) const {
    const double g = raw(t, path);
    return g > clip ? clip : (g < -clip ? -clip : g);
  }
};

struct CertificateRecord {
  std::string tilt_id;
  double estimate = 0.0;       // E[G(shifted) - penalty], a lower bound
  double std_error = 0.0;
  double direct = 0.0;         // (1/T) log E[e^{T G}]
  double direct_std_error = 0.0;
  bool heavy_tail = false;     // one replication carries > 20% of the exponential mass
  bool ok = false;             // estimate <= direct + 3 combined std errors
};

/// Lower-bound certificate for (1/T) log E[e^{T G(W)}] via the shifted path
/// W + int w: every admissible w certifies from below.
CertificateRecord brownian_certificate(const ScalarPathFunctional& G, const TiltFunction& w,
                                       double horizon, double dt, int replications,
                                       std::uint64_t seed, const std::string& tilt_id = "");

/// Lower-bound certificate for (1/T) log E[e^{T G(N)}], N a rate-lambda
/// Poisson path, via multiplicatively tilted clocks penalized at
/// (lambda/T) int poisson_kl(phi).
CertificateRecord poisson_certificate(const ScalarPathFunctional& G, const TiltFunction& phi,
                                      double lambda, double horizon, double dt, int replications,
                                      std::uint64_t seed, const std::string& tilt_id = "");

// --- Closed forms -----------------------------------------------------------------

/// Exact log-MGF of the centered scaled Poisson terminal value against its
/// Brownian limit: poisson_side = lambda n (e^{c/sqrt n} - 1) - lambda sqrt(n) c,
/// bm_side = lambda c^2 / 2, with cubic Taylor remainder bound.
struct FcltCheck {
  double poisson_side = 0.0;
  double bm_side = 0.0;
  double bound = 0.0;
  bool ok = false;
};

FcltCheck fclt_linear_check(double c, double lambda, double n);

// --- Tilt constructors ----------------------------------------------------------

/// State-feedback tilt (1 - w*(xhat)/sqrt n, 1 - w*(xhat)/sqrt n, 1) used by
/// the lower-bound pipeline. Requires n > sup ||w*||^2 so the multipliers
/// stay positive.
TiltControl make_lowerbound_tilt(std::function<Vector(const Vector&)> w_star, double sup_norm,
                                 const SystemN& sys);

// --- Entropy-to-energy diagnostics ------------------------------------------------

/// Piecewise-constant scalar multiplier trace on [0, t_end].
struct ScalarTrace {
  std::vector<double> t;      // segment starts, t[0] = 0
  std::vector<double> value;  // per segment, > 0
  double t_end = 0.0;
};

struct EntropyEnergyRow {
  double n = 0.0;
  double entropy = 0.0;     // n (1/T) int poisson_kl(phi)
  double energy = 0.0;      // (1/T) int |sqrt(n) (1 - phi)|^2
  double ratio = 0.0;       // energy / (2 entropy)
  double slack = 0.0;       // max (phi - 1)^+, the finite-n bound inflation
  bool within_bound = false;
};

/// Checks energy <= 2 M (1 + slack_n) across an n-sweep, M the largest
/// entropy in the sweep; the slack comes from the quadratic lower bounds on
/// poisson_kl and vanishes as the multipliers approach 1.
std::vector<EntropyEnergyRow> entropy_energy_check(
    const std::vector<std::pair<double, ScalarTrace>>& traces);

}  // namespace ersc

#endif  // ERSC_VARIATIONAL_HPP
