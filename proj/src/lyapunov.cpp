#include "ersc/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ersc/util.hpp"

namespace ersc {

double smoothed_ramp(double t) {
  if (t <= -1.0) return -0.5;
  if (t >= 0.0) return t;
  const double s = t + 1.0;
  const double s3 = s * s * s;
  return s3 - 0.5 * s3 * s - 0.5;
}

double smoothed_ramp_d1(double t) {
  if (t <= -1.0) return 0.0;
  if (t >= 0.0) return 1.0;
  const double s = t + 1.0;
  return 3.0 * s * s - 2.0 * s * s * s;
}

double smoothed_ramp_d2(double t) {
  if (t <= -1.0 || t >= 0.0) return 0.0;
  const double s = t + 1.0;
  return 6.0 * s - 6.0 * s * s;
}

double LyapunovWitness::ramp_sum(const Vector& x) const {
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) total += smoothed_ramp(x[i]) / mu[i];
  return total;
}

double LyapunovWitness::value(const Vector& xhat) const {
  return eps0 * eps1 * ramp_sum(-xhat) + eps0 * ramp_sum(xhat);
}

DriftReport drift_report(const SystemN& sys, const LimitParams& p, const SchedulingPolicy& policy,
                         const TiltControl& tilt, double inner_radius,
                         const LyapunovWitness& witness, double modified_weight,
                         std::optional<DriftCertificate> configured) {
  if (inner_radius <= 0.0) throw ConfigError("drift_report: inner radius must be positive");
  const int d = p.d;
  const double outer_radius = 2.0 * inner_radius;

  // Enumerate all lattice states whose scaled image can land in the shell.
  std::vector<int> lo(d), hi(d);
  for (int i = 0; i < d; ++i) {
    const double center = sys.n * p.rho[i];
    lo[i] = std::max(0, static_cast<int>(std::floor(center - outer_radius * sys.sqrt_n)) - 1);
    hi[i] = static_cast<int>(std::ceil(center + outer_radius * sys.sqrt_n)) + 1;
  }

  DriftReport report;
  report.inner_radius = inner_radius;
  report.outer_radius = outer_radius;
  report.c = modified_weight;
  report.sup_drift = -std::numeric_limits<double>::infinity();
  report.sup_modified = -std::numeric_limits<double>::infinity();

  std::vector<double> norms, drifts;
  LatticeState x(d), z(d);
  Vector xhat(d), step(d);
  const double inv_sqn = 1.0 / sys.sqrt_n;

  std::vector<int> cursor = lo;
  bool more = true;
  while (more) {
    for (int i = 0; i < d; ++i) x[i] = cursor[i];
    for (int i = 0; i < d; ++i) xhat[i] = (static_cast<double>(x[i]) - sys.n * p.rho[i]) * inv_sqn;
    const double norm = xhat.norm();
    if (norm >= inner_radius && norm <= outer_radius) {
      policy.allocate(x, z);
      const Vector ma = tilt.arrival.eval(0.0, xhat);
      const Vector ms = tilt.service.eval(0.0, xhat);
      const Vector mr = tilt.abandonment.eval(0.0, xhat);
      const double base = witness.value(xhat);
      double g = 0.0;
      for (int i = 0; i < d; ++i) {
        step = xhat;
        step[i] += inv_sqn;
        g += sys.lambda_n[i] * ma[i] * (witness.value(step) - base);
        step[i] = xhat[i] - inv_sqn;
        const double down = sys.mu_n[i] * z[i] * ms[i] + sys.gamma_n[i] * (x[i] - z[i]) * mr[i];
        g += down * (witness.value(step) - base);
      }
      norms.push_back(norm);
      drifts.push_back(g);
      report.sup_drift = std::max(report.sup_drift, g);
      report.sup_modified = std::max(report.sup_modified, g + modified_weight * norm);
    }
    // advance the odometer
    int axis = d - 1;
    while (axis >= 0) {
      if (++cursor[axis] <= hi[axis]) break;
      cursor[axis] = lo[axis];
      --axis;
    }
    more = axis >= 0;
  }

  report.states = static_cast<std::int64_t>(norms.size());
  if (report.states == 0) {
    throw ConfigError("drift_report: shell contains no lattice states; radius too small for n");
  }

  // Least-squares slope of drift against the scaled norm, shifted upward so
  // the affine bound majorizes every state exactly.
  double mean_s = 0.0, mean_g = 0.0;
  for (std::size_t k = 0; k < norms.size(); ++k) {
    mean_s += norms[k];
    mean_g += drifts[k];
  }
  mean_s /= static_cast<double>(norms.size());
  mean_g /= static_cast<double>(norms.size());
  double cov = 0.0, var = 0.0;
  for (std::size_t k = 0; k < norms.size(); ++k) {
    cov += (norms[k] - mean_s) * (drifts[k] - mean_g);
    var += (norms[k] - mean_s) * (norms[k] - mean_s);
  }
  const double slope = var > 0.0 ? cov / var : 0.0;
  report.fitted.c1 = std::max(-slope, 0.0);
  double c0 = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < norms.size(); ++k) {
    c0 = std::max(c0, drifts[k] + report.fitted.c1 * norms[k]);
  }
  report.fitted.c0 = c0;
  report.fitted_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < norms.size(); ++k) {
    report.fitted_violation =
        std::max(report.fitted_violation, drifts[k] + report.fitted.c1 * norms[k] - report.fitted.c0);
  }
  report.fitted_holds = report.fitted_violation <= 0.0;

  if (configured.has_value()) {
    report.configured_given = true;
    report.configured = *configured;
    report.configured_holds = true;
    for (std::size_t k = 0; k < norms.size(); ++k) {
      if (drifts[k] > configured->c0 - configured->c1 * norms[k]) {
        report.configured_holds = false;
        break;
      }
    }
  }
  return report;
}

}  // namespace ersc
