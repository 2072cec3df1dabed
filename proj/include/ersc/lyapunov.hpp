#ifndef ERSC_LYAPUNOV_HPP
#define ERSC_LYAPUNOV_HPP

#include <cstdint>
#include <optional>

#include "ersc/ctmc.hpp"
#include "ersc/model.hpp"

namespace ersc {

/// C^2 convex ramp: constant -1/2 left of -1, identity right of 0, quartic
/// blend between. Both derivatives match at the knots.
double smoothed_ramp(double t);
double smoothed_ramp_d1(double t);
double smoothed_ramp_d2(double t);

/// Two-sided coercive witness built from the ramp:
///   value(x) = eps0 eps1 sum_i ramp(-x_i)/mu_i + eps0 sum_i ramp(x_i)/mu_i.
struct LyapunovWitness {
  double eps0 = 1.0;
  double eps1 = 1.0;
  Vector mu;

  double ramp_sum(const Vector& x) const;
  double value(const Vector& xhat) const;
};

struct DriftCertificate {
  double c0 = 0.0;
  double c1 = 0.0;
};

/// Exhaustive drift evaluation of the (optionally tilted) generator applied
/// to the witness over the scaled shell R <= ||xhat|| <= 2R.
struct DriftReport {
  double inner_radius = 0.0;
  double outer_radius = 0.0;
  std::int64_t states = 0;

  double sup_drift = 0.0;          // sup over shell of L Z
  double sup_modified = 0.0;       // sup over shell of L Z + c ||xhat||
  double c = 0.0;                  // weight used for sup_modified

  DriftCertificate fitted;         // least-squares slope, shifted to majorize
  double fitted_violation = 0.0;   // max of L Z + c1||xhat|| - c0; <= 0 when fitted holds
  bool fitted_holds = false;       // per-state, exact

  bool configured_given = false;
  DriftCertificate configured;
  bool configured_holds = false;
};

DriftReport drift_report(const SystemN& sys, const LimitParams& p, const SchedulingPolicy& policy,
                         const TiltControl& tilt, double inner_radius,
                         const LyapunovWitness& witness, double modified_weight = 1.0,
                         std::optional<DriftCertificate> configured = std::nullopt);

}  // namespace ersc

#endif  // ERSC_LYAPUNOV_HPP
