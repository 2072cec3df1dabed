#include "ersc/ctmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "ersc/rng.hpp"
#include "ersc/util.hpp"
#include "ersc/variational.hpp"

namespace ersc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

// --- LatticeBox -------------------------------------------------------------

std::int64_t LatticeBox::size() const {
  std::int64_t s = 1;
  for (int u : upper) s *= (u + 1);
  return s;
}

std::int64_t LatticeBox::index_of(const LatticeState& x) const {
  std::int64_t idx = 0;
  for (std::size_t i = 0; i < upper.size(); ++i) idx = idx * (upper[i] + 1) + x[i];
  return idx;
}

LatticeState LatticeBox::state_of(std::int64_t idx) const {
  LatticeState x(upper.size());
  for (std::size_t i = upper.size(); i-- > 0;) {
    const int span = upper[i] + 1;
    x[i] = static_cast<int>(idx % span);
    idx /= span;
  }
  return x;
}

bool LatticeBox::contains(const LatticeState& x) const {
  for (std::size_t i = 0; i < upper.size(); ++i) {
    if (x[i] < 0 || x[i] > upper[i]) return false;
  }
  return true;
}

LatticeBox LatticeBox::around_load(const SystemN& sys, const LimitParams& p, double margin) {
  if (margin < 4.0) throw ConfigError("box margin must be at least 4");
  LatticeBox box;
  box.upper.resize(p.d);
  for (int i = 0; i < p.d; ++i) {
    box.upper[i] = static_cast<int>(std::ceil(sys.n * p.rho[i] + margin * sys.sqrt_n));
  }
  return box;
}

// --- Generator --------------------------------------------------------------

GeneratorMatrix build_generator(const SystemN& sys, const LimitParams& p,
                                const SchedulingPolicy& policy, const LatticeBox& box) {
  const int d = p.d;
  const std::int64_t size = box.size();
  for (int i = 0; i < d; ++i) {
    if (static_cast<double>(box.upper[i]) < sys.n * p.rho[i]) {
      throw ConfigError("box too small: nominal load point outside box");
    }
  }

  GeneratorMatrix gen;
  gen.box = box;
  gen.policy_name = policy.name;
  gen.alloc.resize(static_cast<std::size_t>(size) * d);
  gen.outflow = Vector::Zero(size);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(size) * (2 * d + 1));

  LatticeState x(d), z(d), y(d);
  for (std::int64_t idx = 0; idx < size; ++idx) {
    x = box.state_of(idx);
    policy.allocate(x, z);
    if (!action_feasible(x, z, sys.n)) {
      throw SolverError("policy returned an infeasible allocation inside the box");
    }
    for (int i = 0; i < d; ++i) gen.alloc[static_cast<std::size_t>(idx) * d + i] = z[i];

    double total = 0.0;
    y = x;
    for (int i = 0; i < d; ++i) {
      if (x[i] < box.upper[i]) {  // jumps past the box are suppressed
        y[i] = x[i] + 1;
        trip.emplace_back(idx, box.index_of(y), sys.lambda_n[i]);
        y[i] = x[i];
        total += sys.lambda_n[i];
      }
      const double down = sys.mu_n[i] * z[i] + sys.gamma_n[i] * (x[i] - z[i]);
      if (down > 0.0) {
        y[i] = x[i] - 1;
        trip.emplace_back(idx, box.index_of(y), down);
        y[i] = x[i];
        total += down;
      }
    }
    if (total > 0.0) trip.emplace_back(idx, idx, -total);
    gen.outflow[idx] = total;
  }

  gen.rates.resize(size, size);
  gen.rates.setFromTriplets(trip.begin(), trip.end());
  gen.rates.makeCompressed();
  return gen;
}

// --- TiltFunction / TiltControl ----------------------------------------------

TiltFunction TiltFunction::constant(Vector value) {
  TiltFunction f;
  f.kind_ = Kind::kConstant;
  f.d_ = static_cast<int>(value.size());
  f.value_ = std::move(value);
  return f;
}

TiltFunction TiltFunction::feedback(int d, std::function<Vector(const Vector&)> fn) {
  TiltFunction f;
  f.kind_ = Kind::kFeedback;
  f.d_ = d;
  f.fn_ = std::move(fn);
  return f;
}

TiltFunction TiltFunction::time_table(std::vector<double> knots, std::vector<Vector> values) {
  if (values.empty() || knots.size() + 1 != values.size()) {
    throw ConfigError("time table needs k knots and k+1 values");
  }
  TiltFunction f;
  f.kind_ = Kind::kTable;
  f.d_ = static_cast<int>(values.front().size());
  f.knots_ = std::move(knots);
  f.values_ = std::move(values);
  return f;
}

Vector TiltFunction::eval(double t, const Vector& xhat) const {
  switch (kind_) {
    case Kind::kConstant:
      return value_;
    case Kind::kFeedback:
      return fn_(xhat);
    case Kind::kTable: {
      std::size_t seg = std::upper_bound(knots_.begin(), knots_.end(), t) - knots_.begin();
      return values_[seg];
    }
  }
  return value_;
}

double TiltFunction::next_knot(double t) const {
  if (kind_ != Kind::kTable) return kInf;
  auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  return it == knots_.end() ? kInf : *it;
}

bool TiltFunction::is_constant_one() const {
  return kind_ == Kind::kConstant && (value_.array() == 1.0).all();
}

TiltControl TiltControl::identity(int d) {
  const Vector ones = Vector::Ones(d);
  return TiltControl{TiltFunction::constant(ones), TiltFunction::constant(ones),
                     TiltFunction::constant(ones)};
}

bool TiltControl::is_identity() const {
  return arrival.is_constant_one() && service.is_constant_one() && abandonment.is_constant_one();
}

// --- Entropy accounting -------------------------------------------------------

double entropy_rate(const Vector& arrival, const Vector& service, const Vector& abandonment,
                    const SystemN& sys) {
  double rate = 0.0;
  const double n = static_cast<double>(sys.n);
  for (Eigen::Index i = 0; i < arrival.size(); ++i) {
    rate += sys.lambda_n[i] * poisson_kl(arrival[i]);
    rate += n * sys.mu_n[i] * poisson_kl(service[i]);
    rate += n * sys.gamma_n[i] * poisson_kl(abandonment[i]);
  }
  return rate;
}

double entropy_cost(const TiltTrace& trace, const SystemN& sys) {
  if (trace.t_end <= 0.0) throw ConfigError("entropy_cost: horizon must be positive");
  KahanSum acc;
  for (std::size_t k = 0; k < trace.t.size(); ++k) {
    const double t_next = (k + 1 < trace.t.size()) ? trace.t[k + 1] : trace.t_end;
    acc.add(entropy_rate(trace.arrival[k], trace.service[k], trace.abandonment[k], sys) *
            (t_next - trace.t[k]));
  }
  return acc.value() / trace.t_end;
}

// --- Simulation ----------------------------------------------------------------

LatticeState PathRecord::state_at_event(std::size_t k) const {
  LatticeState x(d);
  for (int i = 0; i < d; ++i) x[i] = state_flat[k * d + i];
  return x;
}

namespace {

struct SimScratch {
  LatticeState z;
  Vector xhat;
  std::vector<double> rate;  // 3d clock rates, family-major
};

void record_event(PathRecord& rec, double t, const LatticeState& x, const LatticeState& z,
                  int family, int cls, double cost, double entropy) {
  rec.t.push_back(t);
  rec.state_flat.insert(rec.state_flat.end(), x.begin(), x.end());
  rec.alloc_flat.insert(rec.alloc_flat.end(), z.begin(), z.end());
  rec.clock_family.push_back(static_cast<std::uint8_t>(family));
  rec.clock_class.push_back(static_cast<std::uint16_t>(cls));
  rec.cost_at.push_back(cost);
  rec.entropy_at.push_back(entropy);
}

}  // namespace

PathRecord simulate(const SystemN& sys, const LimitParams& p, const SchedulingPolicy& policy,
                    const LatticeState& x0, double horizon, std::uint64_t seed) {
  const int d = p.d;
  PathRecord rec;
  rec.d = d;
  rec.t_end = horizon;
  rec.seed = seed;
  ClockStreams streams(seed, d);

  LatticeState x = x0;
  LatticeState z(d);
  std::vector<double> rate(3 * static_cast<std::size_t>(d));
  KahanSum cost;

  rec.state_flat.insert(rec.state_flat.end(), x.begin(), x.end());
  policy.allocate(x, z);
  rec.alloc_flat.insert(rec.alloc_flat.end(), z.begin(), z.end());

  double t = 0.0;
  while (t < horizon) {
    policy.allocate(x, z);
    double cost_rate = 0.0;
    for (int i = 0; i < d; ++i) {
      rate[i] = sys.lambda_n[i];
      rate[d + i] = sys.mu_n[i] * z[i];
      rate[2 * d + i] = sys.gamma_n[i] * (x[i] - z[i]);
      cost_rate += p.kappa[i] * (x[i] - z[i]);
    }
    cost_rate /= sys.sqrt_n;

    double best = kInf;
    int winner = -1;
    for (int k = 0; k < 3 * d; ++k) {
      if (rate[k] <= 0.0) continue;
      const double wait = streams.exponential(k / d, k % d) / rate[k];
      if (wait < best) {
        best = wait;
        winner = k;
      }
    }
    if (winner < 0 || t + best >= horizon) {
      cost.add(cost_rate * (horizon - t));
      break;
    }
    t += best;
    cost.add(cost_rate * best);
    const int family = winner / d;
    const int cls = winner % d;
    x[cls] += (family == 0) ? 1 : -1;
    policy.allocate(x, z);
    record_event(rec, t, x, z, family, cls, cost.value(), 0.0);
  }
  rec.cost_integral = cost.value();
  rec.entropy_integral = 0.0;
  rec.trace.t_end = horizon;
  rec.trace.t = {0.0};
  rec.trace.arrival = {Vector::Ones(d)};
  rec.trace.service = {Vector::Ones(d)};
  rec.trace.abandonment = {Vector::Ones(d)};
  return rec;
}

PathRecord simulate_tilted(const SystemN& sys, const LimitParams& p,
                           const SchedulingPolicy& policy, const TiltControl& tilt,
                           const LatticeState& x0, double horizon, std::uint64_t seed) {
  const int d = p.d;
  PathRecord rec;
  rec.d = d;
  rec.t_end = horizon;
  rec.seed = seed;
  rec.trace.t_end = horizon;
  ClockStreams streams(seed, d);

  LatticeState x = x0;
  LatticeState z(d);
  Vector xhat(d);
  std::vector<double> rate(3 * static_cast<std::size_t>(d));
  KahanSum cost, entropy;

  rec.state_flat.insert(rec.state_flat.end(), x.begin(), x.end());
  policy.allocate(x, z);
  rec.alloc_flat.insert(rec.alloc_flat.end(), z.begin(), z.end());

  double t = 0.0;
  while (t < horizon) {
    policy.allocate(x, z);
    for (int i = 0; i < d; ++i) xhat[i] = (static_cast<double>(x[i]) - sys.n * p.rho[i]) / sys.sqrt_n;

    // Multipliers are frozen over the inter-event segment (left endpoint),
    // so rates are exactly piecewise constant and the entropy integral exact.
    const Vector ma = tilt.arrival.eval(t, xhat);
    const Vector ms = tilt.service.eval(t, xhat);
    const Vector mr = tilt.abandonment.eval(t, xhat);
    for (int i = 0; i < d; ++i) {
      if (ma[i] <= 0.0 || ms[i] <= 0.0 || mr[i] <= 0.0) {
        throw ConfigError("tilt multiplier nonpositive along the path");
      }
    }
    const bool same_as_last =
        !rec.trace.t.empty() && (rec.trace.arrival.back() - ma).lpNorm<Eigen::Infinity>() == 0.0 &&
        (rec.trace.service.back() - ms).lpNorm<Eigen::Infinity>() == 0.0 &&
        (rec.trace.abandonment.back() - mr).lpNorm<Eigen::Infinity>() == 0.0;
    if (!same_as_last) {
      rec.trace.t.push_back(t);
      rec.trace.arrival.push_back(ma);
      rec.trace.service.push_back(ms);
      rec.trace.abandonment.push_back(mr);
    }

    double cost_rate = 0.0;
    for (int i = 0; i < d; ++i) {
      rate[i] = sys.lambda_n[i] * ma[i];
      rate[d + i] = sys.mu_n[i] * ms[i] * z[i];
      rate[2 * d + i] = sys.gamma_n[i] * mr[i] * (x[i] - z[i]);
      cost_rate += p.kappa[i] * (x[i] - z[i]);
    }
    cost_rate /= sys.sqrt_n;
    const double ent_rate = entropy_rate(ma, ms, mr, sys);

    double best = kInf;
    int winner = -1;
    for (int k = 0; k < 3 * d; ++k) {
      if (rate[k] <= 0.0) continue;
      const double wait = streams.exponential(k / d, k % d) / rate[k];
      if (wait < best) {
        best = wait;
        winner = k;
      }
    }

    const double knot = std::min({tilt.arrival.next_knot(t), tilt.service.next_knot(t),
                                  tilt.abandonment.next_knot(t)});
    if (knot < horizon && t + best >= knot) {
      // Rates change at the table breakpoint; memorylessness permits a redraw.
      cost.add(cost_rate * (knot - t));
      entropy.add(ent_rate * (knot - t));
      t = knot;
      continue;
    }
    if (winner < 0 || t + best >= horizon) {
      cost.add(cost_rate * (horizon - t));
      entropy.add(ent_rate * (horizon - t));
      break;
    }
    t += best;
    cost.add(cost_rate * best);
    entropy.add(ent_rate * best);
    const int family = winner / d;
    const int cls = winner % d;
    x[cls] += (family == 0) ? 1 : -1;
    policy.allocate(x, z);
    record_event(rec, t, x, z, family, cls, cost.value(), entropy.value());
  }
  rec.cost_integral = cost.value();
  rec.entropy_integral = entropy.value();
  return rec;
}

// --- Excursion statistics -------------------------------------------------------

ExcursionStats excursion_stats(const PathRecord& path, const SystemN& sys, const LimitParams& p,
                               const MarkovControl& v) {
  const int d = path.d;
  ExcursionStats stats;
  KahanSum frac, d1, d2;

  const double threshold = p.rho[d - 1] * sys.sqrt_n;
  LatticeState x(d);
  Vector xhat(d);

  const std::size_t segments = path.t.size() + 1;
  for (std::size_t k = 0; k < segments; ++k) {
    const double t0 = (k == 0) ? 0.0 : path.t[k - 1];
    const double t1 = (k < path.t.size()) ? path.t[k] : path.t_end;
    if (t1 <= t0) continue;
    double partial = 0.0;
    for (int i = 0; i < d; ++i) {
      x[i] = path.state_flat[k * d + i];
      xhat[i] = (static_cast<double>(x[i]) - sys.n * p.rho[i]) / sys.sqrt_n;
      if (i < d - 1) partial += xhat[i];
    }
    const bool outside = partial > threshold;
    if (!outside) continue;
    const double len = t1 - t0;
    frac.add(len);

    double actual_cost = 0.0;
    for (int i = 0; i < d; ++i) {
      actual_cost += p.kappa[i] * (x[i] - path.alloc_flat[k * d + i]);
    }
    d1.add(actual_cost / sys.sqrt_n * len);

    long total = 0;
    for (int i = 0; i < d; ++i) total += x[i];
    const double excess = static_cast<double>(std::max<long>(total - sys.n, 0));
    const LatticeState q = round_to_lattice(excess * v(xhat));
    double formula_cost = 0.0;
    for (int i = 0; i < d; ++i) formula_cost += p.kappa[i] * q[i];
    d2.add(formula_cost / sys.sqrt_n * len);
  }

  stats.fraction_outside = frac.value() / path.t_end;
  stats.delta1 = d1.value();
  stats.delta2 = d2.value();
  return stats;
}

// --- Export ------------------------------------------------------------------------

void write_path(std::ostream& os, const PathRecord& path, const std::string& config_echo) {
  os << "# seed " << path.seed << "\n";
  if (!config_echo.empty()) {
    std::size_t start = 0;
    while (start < config_echo.size()) {
      std::size_t stop = config_echo.find('\n', start);
      if (stop == std::string::npos) stop = config_echo.size();
      os << "# " << config_echo.substr(start, stop - start) << "\n";
      start = stop + 1;
    }
  }
  os << "time";
  for (int i = 0; i < path.d; ++i) os << " x" << (i + 1);
  os << " clock cost_accum entropy_accum\n";
  os << format_g17(0.0);
  for (int i = 0; i < path.d; ++i) os << " " << path.state_flat[i];
  os << " - " << format_g17(0.0) << " " << format_g17(0.0) << "\n";
  static const char* family_tag[3] = {"a", "s", "r"};
  for (std::size_t k = 0; k < path.events(); ++k) {
    os << format_g17(path.t[k]);
    for (int i = 0; i < path.d; ++i) os << " " << path.state_flat[(k + 1) * path.d + i];
    os << " " << family_tag[path.clock_family[k]] << (path.clock_class[k] + 1);
    os << " " << format_g17(path.cost_at[k]) << " " << format_g17(path.entropy_at[k]) << "\n";
  }
}

}  // namespace ersc
