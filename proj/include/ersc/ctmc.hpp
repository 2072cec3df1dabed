#ifndef ERSC_CTMC_HPP
#define ERSC_CTMC_HPP

#include <Eigen/SparseCore>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ersc/model.hpp"

namespace ersc {

/// Truncation box [0, upper_1] x ... x [0, upper_d] with row-major state
/// enumeration. Upper bounds must leave at least `margin` sqrt(n) of room
/// above the nominal load point n rho.
struct LatticeBox {
  std::vector<int> upper;

  std::int64_t size() const;
  std::int64_t index_of(const LatticeState& x) const;
  LatticeState state_of(std::int64_t idx) const;
  bool contains(const LatticeState& x) const;

  static LatticeBox around_load(const SystemN& sys, const LimitParams& p, double margin);
};

/// Conservative rate matrix of the controlled chain on a box. Jumps that
/// would leave the box are suppressed, so every row sums to zero and the
/// zero-cost principal eigenvalue is exactly 0.
struct GeneratorMatrix {
  LatticeBox box;
  Eigen::SparseMatrix<double, Eigen::RowMajor> rates;  // off-diagonal >= 0, rows sum to 0
  Vector outflow;                                      // per-row total outflow
  std::vector<int> alloc;                              // allocation used, flattened size * d
  std::string policy_name;

  int dim() const { return static_cast<int>(box.upper.size()); }
};

GeneratorMatrix build_generator(const SystemN& sys, const LimitParams& p,
                                const SchedulingPolicy& policy, const LatticeBox& box);

/// One family of rate multipliers (per class): constant, state feedback on
/// the scaled state, or a piecewise-constant-in-time table.
class TiltFunction {
 public:
  static TiltFunction constant(Vector value);
  static TiltFunction feedback(int d, std::function<Vector(const Vector& xhat)> fn);
  static TiltFunction time_table(std::vector<double> knots, std::vector<Vector> values);

  Vector eval(double t, const Vector& xhat) const;
  /// Next time-table breakpoint strictly after t, or +inf.
  double next_knot(double t) const;
  bool is_constant_one() const;
  int dim() const { return d_; }

 private:
  enum class Kind { kConstant, kFeedback, kTable };
  Kind kind_ = Kind::kConstant;
  int d_ = 0;
  Vector value_;
  std::function<Vector(const Vector&)> fn_;
  std::vector<double> knots_;
  std::vector<Vector> values_;
};

/// Rate-multiplier triple (arrival, service, abandonment) driving the
/// extended queueing process.
struct TiltControl {
  TiltFunction arrival;
  TiltFunction service;
  TiltFunction abandonment;

  static TiltControl identity(int d);
  bool is_identity() const;
};

/// Piecewise-constant record of the multipliers seen along a path; the
/// entropy cost of such a trace is exact.
struct TiltTrace {
  double t_end = 0.0;
  std::vector<double> t;                     // segment start times, t[0] = 0
  std::vector<Vector> arrival, service, abandonment;  // per segment
};

/// Event-driven sample path. States are stored flattened, d entries per
/// event; entry 0 is the initial state. cost_at/entropy_at give the running
/// integrals at each event time.
struct PathRecord {
  int d = 0;
  double t_end = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> t;
  std::vector<int> state_flat;
  std::vector<int> alloc_flat;
  std::vector<std::uint8_t> clock_family;  // 0 arrival, 1 service, 2 abandonment
  std::vector<std::uint16_t> clock_class;
  std::vector<double> cost_at;
  std::vector<double> entropy_at;
  double cost_integral = 0.0;     // int_0^T kappa . Qhat dt
  double entropy_integral = 0.0;  // int_0^T entropy rate dt
  TiltTrace trace;

  std::size_t events() const { return t.size(); }
  LatticeState state_at_event(std::size_t k) const;  // state after event k-1 (k=0: initial)
};

PathRecord simulate(const SystemN& sys, const LimitParams& p, const SchedulingPolicy& policy,
                    const LatticeState& x0, double horizon, std::uint64_t seed);

PathRecord simulate_tilted(const SystemN& sys, const LimitParams& p,
                           const SchedulingPolicy& policy, const TiltControl& tilt,
                           const LatticeState& x0, double horizon, std::uint64_t seed);

/// Entropy rate of a multiplier triple against the base clocks:
/// sum_i lambda^n_i k(a_i) + n mu^n_i k(s_i) + n gamma^n_i k(r_i)
/// with k(r) = r ln r - r + 1.
double entropy_rate(const Vector& arrival, const Vector& service, const Vector& abandonment,
                    const SystemN& sys);

/// Time-averaged entropy cost of a piecewise-constant trace over [0, t_end].
double entropy_cost(const TiltTrace& trace, const SystemN& sys);

/// Time fraction spent outside the region where the queue-vector formula of
/// the constructed policy is valid, plus the two running-cost correction
/// integrals accumulated there.
struct ExcursionStats {
  double fraction_outside = 0.0;
  double delta1 = 0.0;  // int r(actual queue) 1{outside} dt
  double delta2 = 0.0;  // int r(formula queue) 1{outside} dt
};

ExcursionStats excursion_stats(const PathRecord& path, const SystemN& sys, const LimitParams& p,
                               const MarkovControl& v);

/// Columnar text export: comment preamble with seed/config echo, one header
/// line, then time, state..., clock id, cost accum, entropy accum per event.
void write_path(std::ostream& os, const PathRecord& path, const std::string& config_echo);

}  // namespace ersc

#endif  // ERSC_CTMC_HPP
