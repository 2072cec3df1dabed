#include "ersc/variational.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ersc/rng.hpp"
#include "ersc/util.hpp"

namespace ersc {

double poisson_kl(double r) {
  if (r < 0.0) throw ConfigError("poisson_kl: argument must be nonnegative");
  if (r == 0.0) return 1.0;
  return r * std::log(r) - r + 1.0;
}

std::pair<bool, bool> poisson_kl_bounds(double r, double l) {
  if (r <= -1.0) throw ConfigError("poisson_kl_bounds: argument must exceed -1");
  const double value = poisson_kl(1.0 + r);
  bool below = true;
  bool above = true;
  if (r <= 0.0) below = value >= 0.5 * r * r;
  if (r >= 0.0 && r < l) above = value >= r * r / (2.0 * (1.0 + l));
  return {below, above};
}

// --- Diffusion paths ------------------------------------------------------------

DiffusionPath euler_path(const std::function<Vector(const Vector&)>& drift_fn,
                         const Vector& sigma_diag, const TiltFunction* w, const Vector& x0,
                         double horizon, double dt, std::uint64_t seed,
                         const std::function<double(const Vector&)>& cost_fn) {
  if (dt <= 0.0 || horizon <= 0.0) throw ConfigError("euler_path: dt and horizon must be positive");
  const int d = static_cast<int>(x0.size());
  const int steps = static_cast<int>(std::llround(horizon / dt));

  DiffusionPath path;
  path.dt = dt;
  path.t.resize(steps + 1);
  path.x.resize(steps + 1, d);
  std::mt19937_64 eng(derive_seed(seed, 0));
  std::normal_distribution<double> gauss(0.0, 1.0);

  Vector x = x0;
  path.t[0] = 0.0;
  path.x.row(0) = x.transpose();
  const double sq_dt = std::sqrt(dt);

  KahanSum cost, energy;
  double prev_cost = cost_fn ? cost_fn(x) : 0.0;
  double prev_energy = 0.0;
  if (w != nullptr) prev_energy = 0.5 * w->eval(0.0, x).squaredNorm();

  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    Vector move = drift_fn(x) * dt;
    if (w != nullptr) {
      const Vector wt = w->eval(t, x);
      move += sigma_diag.cwiseProduct(wt) * dt;
    }
    for (int i = 0; i < d; ++i) move[i] += sigma_diag[i] * sq_dt * gauss(eng);
    x += move;
    path.t[k + 1] = (k + 1) * dt;
    path.x.row(k + 1) = x.transpose();

    const double cur_cost = cost_fn ? cost_fn(x) : 0.0;
    cost.add(0.5 * (prev_cost + cur_cost) * dt);
    prev_cost = cur_cost;
    if (w != nullptr) {
      const double cur_energy = 0.5 * w->eval(path.t[k + 1], x).squaredNorm();
      energy.add(0.5 * (prev_energy + cur_energy) * dt);
      prev_energy = cur_energy;
    }
  }
  path.cost_integral = cost.value();
  path.energy_integral = energy.value();
  return path;
}

DiffusionPath simulate_diffusion(const MarkovControl& v, const LimitParams& p, const Vector& x0,
                                 double horizon, double dt, std::uint64_t seed) {
  auto drift_fn = [&](const Vector& x) { return drift(x, v(x), p); };
  auto cost_fn = [&](const Vector& x) { return running_cost(x, v(x), p); };
  return euler_path(drift_fn, p.sigma_diag(), nullptr, x0, horizon, dt, seed, cost_fn);
}

DiffusionPath simulate_extended_diffusion(const MarkovControl& v, const TiltFunction& w,
                                          const LimitParams& p, const Vector& x0, double horizon,
                                          double dt, std::uint64_t seed) {
  auto drift_fn = [&](const Vector& x) { return drift(x, v(x), p); };
  auto cost_fn = [&](const Vector& x) { return running_cost(x, v(x), p); };
  return euler_path(drift_fn, p.sigma_diag(), &w, x0, horizon, dt, seed, cost_fn);
}

// --- Certificates ------------------------------------------------------------------

namespace {

struct MeanVar {
  double mean = 0.0;
  double sd = 0.0;
};

MeanVar mean_and_sd(const std::vector<double>& v) {
  MeanVar mv;
  KahanSum s;
  for (double x : v) s.add(x);
  mv.mean = s.value() / static_cast<double>(v.size());
  KahanSum q;
  for (double x : v) q.add((x - mv.mean) * (x - mv.mean));
  mv.sd = std::sqrt(q.value() / (static_cast<double>(v.size()) - 1.0));
  return mv;
}

/// (1/T) log mean e^{T g_k} with a delta-method standard error and a
/// heavy-tail flag when one replication dominates the exponential mass.
void direct_log_mgf(const std::vector<double>& g, double horizon, double& est, double& se,
                    bool& heavy) {
  const std::size_t reps = g.size();
  const double gmax = *std::max_element(g.begin(), g.end());
  KahanSum sum_w;
  double wmax = 0.0;
  std::vector<double> w(reps);
  for (std::size_t k = 0; k < reps; ++k) {
    w[k] = std::exp(horizon * (g[k] - gmax));  // weights in (0, 1]
    sum_w.add(w[k]);
    wmax = std::max(wmax, w[k]);
  }
  const double mean_w = sum_w.value() / static_cast<double>(reps);
  est = (std::log(mean_w) + horizon * gmax) / horizon;
  const MeanVar mv = mean_and_sd(w);
  se = mv.sd / (mean_w * std::sqrt(static_cast<double>(reps)) * horizon);
  heavy = wmax / sum_w.value() > 0.2;
}

void finish_record(CertificateRecord& rec, const std::vector<double>& lower,
                   const std::vector<double>& g, double horizon) {
  const MeanVar mv = mean_and_sd(lower);
  rec.estimate = mv.mean;
  rec.std_error = mv.sd / std::sqrt(static_cast<double>(lower.size()));
  direct_log_mgf(g, horizon, rec.direct, rec.direct_std_error, rec.heavy_tail);
  const double combined = std::sqrt(rec.std_error * rec.std_error +
                                    rec.direct_std_error * rec.direct_std_error);
  rec.ok = rec.estimate <= rec.direct + 3.0 * combined;
}

}  // namespace

CertificateRecord brownian_certificate(const ScalarPathFunctional& G, const TiltFunction& w,
                                       double horizon, double dt, int replications,
                                       std::uint64_t seed, const std::string& tilt_id) {
  if (replications < 2) throw ConfigError("brownian_certificate: need at least 2 replications");
  const int steps = static_cast<int>(std::llround(horizon / dt));

  std::vector<double> lower(replications), plain(replications);
  parallel_for(static_cast<std::size_t>(replications), [&](std::size_t rep) {
    std::mt19937_64 eng(derive_seed(seed, rep));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sq_dt = std::sqrt(dt);

    std::vector<double> t(steps + 1), bare(steps + 1), shifted(steps + 1);
    bare[0] = shifted[0] = 0.0;
    Vector state(1);
    KahanSum energy;
    for (int k = 0; k < steps; ++k) {
      t[k] = k * dt;
      const double dW = sq_dt * gauss(eng);
      bare[k + 1] = bare[k] + dW;
      state[0] = shifted[k];
      const double wk = w.eval(t[k], state)[0];
      shifted[k + 1] = shifted[k] + dW + wk * dt;
      // The applied control is piecewise constant on the mesh; its energy is
      // the left rule exactly, which keeps the certificate one-sided.
      energy.add(0.5 * wk * wk * dt);
    }
    t[steps] = horizon;
    lower[rep] = G(t, shifted) - energy.value() / horizon;
    plain[rep] = G(t, bare);
  });

  CertificateRecord rec;
  rec.tilt_id = tilt_id;
  finish_record(rec, lower, plain, horizon);
  return rec;
}

CertificateRecord poisson_certificate(const ScalarPathFunctional& G, const TiltFunction& phi,
                                      double lambda, double horizon, double dt, int replications,
                                      std::uint64_t seed, const std::string& tilt_id) {
  if (replications < 2) throw ConfigError("poisson_certificate: need at least 2 replications");
  if (lambda <= 0.0) throw ConfigError("poisson_certificate: rate must be positive");
  const int mesh = static_cast<int>(std::llround(horizon / dt));

  auto sample_counts = [&](std::mt19937_64& eng, bool tilted, double& entropy_out) {
    std::exponential_distribution<double> exp1(1.0);
    std::vector<double> counts(mesh + 1, 0.0);
    double t = 0.0;
    double count = 0.0;
    KahanSum entropy;
    int cursor = 0;
    Vector state(1);
    while (t < horizon) {
      state[0] = count;
      double mult = 1.0;
      if (tilted) {
        mult = phi.eval(t, state)[0];
        if (mult <= 0.0) throw ConfigError("poisson_certificate: nonpositive multiplier");
      }
      const double rate = lambda * mult;
      const double wait = exp1(eng) / rate;
      double t_next = t + wait;
      const double knot = tilted ? phi.next_knot(t) : horizon;
      bool event = true;
      if (knot < horizon && t_next >= knot) {
        t_next = knot;  // multiplier changes; redraw is exact for exponentials
        event = false;
      } else if (t_next >= horizon) {
        t_next = horizon;
        event = false;
      }
      if (tilted) entropy.add(lambda * poisson_kl(mult) * (t_next - t));
      while (cursor <= mesh && cursor * dt <= t_next) {
        counts[cursor] = count;
        ++cursor;
      }
      if (event) count += 1.0;
      t = t_next;
      if (!event && t >= horizon) break;
    }
    while (cursor <= mesh) counts[cursor++] = count;
    entropy_out = entropy.value();
    return counts;
  };

  std::vector<double> lower(replications), plain(replications);
  std::vector<double> t(mesh + 1);
  for (int k = 0; k <= mesh; ++k) t[k] = k * dt;

  parallel_for(static_cast<std::size_t>(replications), [&](std::size_t rep) {
    std::mt19937_64 eng_tilt(derive_seed(seed, 2 * rep));
    std::mt19937_64 eng_plain(derive_seed(seed, 2 * rep + 1));
    double entropy = 0.0;
    const std::vector<double> tilted = sample_counts(eng_tilt, true, entropy);
    double unused = 0.0;
    const std::vector<double> bare = sample_counts(eng_plain, false, unused);
    lower[rep] = G(t, tilted) - entropy / horizon;
    plain[rep] = G(t, bare);
  });

  CertificateRecord rec;
  rec.tilt_id = tilt_id;
  finish_record(rec, lower, plain, horizon);
  return rec;
}

// --- Closed forms ---------------------------------------------------------------------

FcltCheck fclt_linear_check(double c, double lambda, double n) {
  if (n < 1.0) throw ConfigError("fclt_linear_check: n must be at least 1");
  FcltCheck out;
  const double sq = std::sqrt(n);
  out.poisson_side = lambda * n * std::expm1(c / sq) - lambda * sq * c;
  out.bm_side = 0.5 * lambda * c * c;
  const double a = std::abs(c);
  out.bound = lambda * a * a * a * std::exp(a / sq) / (6.0 * sq);
  out.ok = std::abs(out.poisson_side - out.bm_side) <= out.bound;
  return out;
}

// --- Tilt constructors ------------------------------------------------------------------

TiltControl make_lowerbound_tilt(std::function<Vector(const Vector&)> w_star, double sup_norm,
                                 const SystemN& sys) {
  const double n = static_cast<double>(sys.n);
  if (n <= sup_norm * sup_norm) {
    throw ConfigError("make_lowerbound_tilt: n must exceed sup ||w*||^2 to keep multipliers positive");
  }
  const int d = static_cast<int>(sys.lambda_n.size());
  const double sq = sys.sqrt_n;
  auto multiplier = [w_star, sq, d](const Vector& xhat) {
    Vector w = w_star(xhat);
    Vector m(d);
    for (int i = 0; i < d; ++i) m[i] = 1.0 - w[i] / sq;
    return m;
  };
  TiltControl tilt{TiltFunction::feedback(d, multiplier), TiltFunction::feedback(d, multiplier),
                   TiltFunction::constant(Vector::Ones(d))};
  return tilt;
}

// --- Entropy-to-energy -----------------------------------------------------------------

std::vector<EntropyEnergyRow> entropy_energy_check(
    const std::vector<std::pair<double, ScalarTrace>>& traces) {
  std::vector<EntropyEnergyRow> rows;
  rows.reserve(traces.size());
  double biggest_entropy = 0.0;
  for (const auto& [n, trace] : traces) {
    EntropyEnergyRow row;
    row.n = n;
    KahanSum ent, ene;
    double slack = 0.0;
    for (std::size_t k = 0; k < trace.t.size(); ++k) {
      const double t_next = (k + 1 < trace.t.size()) ? trace.t[k + 1] : trace.t_end;
      const double len = t_next - trace.t[k];
      const double phi = trace.value[k];
      ent.add(n * poisson_kl(phi) * len);
      const double dev = std::sqrt(n) * (1.0 - phi);
      ene.add(dev * dev * len);
      slack = std::max(slack, phi - 1.0);
    }
    row.entropy = ent.value() / trace.t_end;
    row.energy = ene.value() / trace.t_end;
    row.ratio = row.entropy > 0.0 ? row.energy / (2.0 * row.entropy) : 0.0;
    row.slack = slack;
    biggest_entropy = std::max(biggest_entropy, row.entropy);
    rows.push_back(row);
  }
  for (auto& row : rows) {
    // energy <= 2 M (1 + slack): both quadratic bounds on poisson_kl combined.
    row.within_bound = row.energy <= 2.0 * biggest_entropy * (1.0 + row.slack) + 1e-12;
  }
  return rows;
}

}  // namespace ersc
