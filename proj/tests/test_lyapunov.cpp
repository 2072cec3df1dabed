#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ersc/config.hpp"
#include "ersc/experiments.hpp"
#include "ersc/lyapunov.hpp"
#include "ersc/model.hpp"
#include "ersc/util.hpp"

using namespace ersc;

namespace {

Vector vec(std::initializer_list<double> vals) {
  Vector v(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (double x : vals) v[i++] = x;
  return v;
}

LimitParams reference() { return ExperimentConfig::reference().params; }

double middle_branch(double t) {
  const double s = t + 1.0;
  return s * s * s - 0.5 * s * s * s * s - 0.5;
}

}  // namespace

TEST_CASE("ramp branch values") {
  CHECK(smoothed_ramp(2.0) == 2.0);
  CHECK(smoothed_ramp(-1.0) == -0.5);
  CHECK(smoothed_ramp(-5.0) == -0.5);
  CHECK(smoothed_ramp(-0.5) == doctest::Approx(-0.40625).epsilon(1e-15));
  CHECK(smoothed_ramp(0.0) == 0.0);
}

TEST_CASE("ramp is C^2 at the knots") {
  // one-sided values from the middle polynomial against the outer branches
  CHECK(std::abs(middle_branch(0.0) - 0.0) <= 1e-12);
  CHECK(std::abs(middle_branch(-1.0) - (-0.5)) <= 1e-12);

  // derivative formulas agree across the knots
  for (double knot : {-1.0, 0.0}) {
    for (double eps : {1e-7, 1e-9}) {
      CHECK(std::abs(smoothed_ramp_d1(knot - eps) - smoothed_ramp_d1(knot + eps)) <= 1e-5);
      CHECK(std::abs(smoothed_ramp_d2(knot - eps) - smoothed_ramp_d2(knot + eps)) <= 1e-5);
    }
  }
  CHECK(smoothed_ramp_d1(-1.0) == 0.0);
  CHECK(smoothed_ramp_d1(0.0) == 1.0);
  CHECK(smoothed_ramp_d2(-1.0) == 0.0);
  CHECK(smoothed_ramp_d2(0.0) == 0.0);

  // finite differences of the value match the analytic first derivative
  for (double t : {-1.5, -0.75, -0.25, 0.5}) {
    const double fd = (smoothed_ramp(t + 1e-6) - smoothed_ramp(t - 1e-6)) / 2e-6;
    CHECK(std::abs(fd - smoothed_ramp_d1(t)) <= 1e-6);
  }
}

TEST_CASE("ramp is convex") {
  std::mt19937_64 eng(13);
  std::uniform_real_distribution<double> uni(-3.0, 3.0);
  for (double t = -2.0; t <= 2.0; t += 1e-3) CHECK(smoothed_ramp_d2(t) >= 0.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const double a = uni(eng);
    const double b = uni(eng);
    CHECK(smoothed_ramp(0.5 * (a + b)) <= 0.5 * (smoothed_ramp(a) + smoothed_ramp(b)) + 1e-12);
  }
}

TEST_CASE("witness is coercive on probe shells") {
  LyapunovWitness witness;
  witness.mu = reference().mu;
  for (double radius : {1.0, 2.0, 4.0, 8.0}) {
    double boundary_min = 1e300;
    double interior_min = 1e300;
    for (double angle = 0.0; angle < 6.28318; angle += 0.01) {
      const Vector x = vec({radius * std::cos(angle), radius * std::sin(angle)});
      boundary_min = std::min(boundary_min, witness.value(x));
      interior_min = std::min(interior_min, witness.value(0.5 * x));
    }
    interior_min = std::min(interior_min, witness.value(Vector::Zero(2)));
    CHECK(boundary_min > interior_min);
  }
}

TEST_CASE("drift report on the zero-rate fixture") {
  const LimitParams p = reference();
  const SystemN sys =
      SystemN::raw(16, Vector::Zero(2), Vector::Zero(2), Vector::Zero(2), Vector::Zero(2));
  LyapunovWitness witness;
  witness.mu = p.mu;
  const DriftReport report = drift_report(sys, p, priority_policy(2, 16), TiltControl::identity(2),
                                          1.0, witness, 0.0,
                                          DriftCertificate{0.0, 0.0});
  CHECK(report.sup_drift == 0.0);
  CHECK(report.fitted.c0 == 0.0);
  CHECK(report.fitted.c1 == 0.0);
  CHECK(report.fitted_holds);
  CHECK(report.configured_holds);
}

TEST_CASE("identity-tilt drift certificate has positive decay") {
  SUBCASE("one class") {
    const LimitParams p = LimitParams::create(vec({1.0}), vec({0.0}), vec({1.0}), vec({0.0}),
                                              vec({0.5}), vec({0.3}));
    const SystemN sys = SystemN::embed(p, 32);
    LyapunovWitness witness;
    witness.mu = p.mu;
    const DriftReport report = drift_report(sys, p, priority_policy(1, 32),
                                            TiltControl::identity(1), 2.0, witness);
    CHECK(report.fitted.c1 > 0.0);
    CHECK(report.fitted_holds);
    CHECK(report.fitted_violation <= 0.0);
    CHECK(report.states > 0);
  }
  SUBCASE("reference instance") {
    const LimitParams p = reference();
    const SystemN sys = SystemN::embed(p, 64);
    LyapunovWitness witness;
    witness.mu = p.mu;
    const DriftReport report = drift_report(sys, p, priority_policy(2, 64),
                                            TiltControl::identity(2), 2.0, witness);
    CHECK(report.fitted.c1 > 0.0);
    CHECK(report.fitted_holds);
  }
}

TEST_CASE("bounded tilts perturb the fitted decay at the square-root scale") {
  const LimitParams p = reference();
  LyapunovWitness witness;
  witness.mu = p.mu;
  const double K = 1.0;

  auto fitted_gap = [&](int n) {
    const SystemN sys = SystemN::embed(p, n);
    const DriftReport base = drift_report(sys, p, priority_policy(2, n),
                                          TiltControl::identity(2), 2.0, witness);
    // deviation K in every multiplier slot: h^n(tilt) has norm K per class
    TiltControl tilt{
        TiltFunction::constant(Vector::Constant(2, 1.0 - K / sys.sqrt_n)),
        TiltFunction::constant(Vector::Constant(2, 1.0 + K / sys.sqrt_n)),
        TiltFunction::constant(Vector::Constant(2, 1.0 - K / sys.sqrt_n))};
    const DriftReport tilted = drift_report(sys, p, priority_policy(2, n), tilt, 2.0, witness);
    CHECK(tilted.fitted.c1 > 0.0);
    return std::abs(tilted.fitted.c1 - base.fitted.c1);
  };

  const double gap64 = fitted_gap(64);
  const double gap256 = fitted_gap(256);
  CHECK(gap64 > 0.0);
  // O(K/sqrt(n)) envelope: quadrupling n should roughly halve the shift
  CHECK(gap256 <= gap64 * 0.5 * 2.5);
}
