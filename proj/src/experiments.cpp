#include "ersc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "ersc/occupation.hpp"
#include "ersc/rng.hpp"
#include "ersc/util.hpp"

namespace ersc {

SchedulingPolicy priority_policy(int d, int n) {
  SchedulingPolicy policy;
  policy.d = d;
  policy.name = "priority";
  policy.allocate = [n](const LatticeState& x, LatticeState& z) { priority_fill(x, n, z); };
  return policy;
}

namespace {

PowerOptions power_options(const ExperimentConfig& cfg) {
  PowerOptions opts;
  opts.tol = cfg.eigen_tol;
  opts.max_iterations = cfg.eigen_max_iter;
  return opts;
}

HjbOptions hjb_options(const ExperimentConfig& cfg) {
  HjbOptions opts;
  opts.residual_tol = cfg.hjb_tol;
  opts.max_outer = cfg.hjb_max_outer;
  if (cfg.u0_class > 0) opts.frozen_vertex = cfg.u0_class - 1;
  return opts;
}

Vector u0_vertex(const ExperimentConfig& cfg) {
  const int d = cfg.params.d;
  return simplex_vertex(d, cfg.u0_class > 0 ? cfg.u0_class - 1 : d - 1);
}

LatticeState start_state(const SystemN& sys, const LimitParams& p) {
  LatticeState x(p.d);
  for (int i = 0; i < p.d; ++i) x[i] = static_cast<int>(std::lround(sys.n * p.rho[i]));
  return x;
}

}  // namespace

// --- ao-table ------------------------------------------------------------------

AoResult ao_table(const ExperimentConfig& cfg) {
  AoResult result;
  const Grid grid = Grid::cube(cfg.params.d, cfg.grid_extent, cfg.grid_h);
  result.lambda = hjb_solve(cfg.params, grid, hjb_options(cfg)).value;

  for (int n : cfg.n_list) {
    AoRow row;
    row.n = n;
    row.truncation = "-";
    try {
      const SystemN sys = SystemN::embed(cfg.params, n);
      const LatticeBox box = LatticeBox::around_load(sys, cfg.params, cfg.box_margin);
      const OptimizeResult opt = prelimit_optimize(sys, cfg.params, box, power_options(cfg));
      row.value_n = opt.solution.value;
      row.gap = std::abs(row.value_n - result.lambda);
      row.ok = true;
      if (cfg.truncation_sweep) {
        LatticeBox wide = box;
        for (int i = 0; i < cfg.params.d; ++i) {
          wide.upper[i] = static_cast<int>(std::ceil(1.25 * box.upper[i]));
        }
        const double wide_value =
            prelimit_optimize(sys, cfg.params, wide, power_options(cfg)).solution.value;
        row.truncation = std::abs(wide_value - row.value_n) < 1e-6 ? "ok" : "drift";
      }
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    result.rows.push_back(row);
  }

  result.table.columns = {"n", "value_n", "lambda", "gap", "truncation", "status"};
  for (const AoRow& row : result.rows) {
    result.table.add_row({std::to_string(row.n),
                          row.ok ? Table::num(row.value_n) : "",
                          Table::num(result.lambda),
                          row.ok ? Table::num(row.gap) : "",
                          row.truncation,
                          row.ok ? "ok" : ("failed: " + row.error)});
  }
  return result;
}

// --- variational battery -------------------------------------------------------------

namespace {

std::vector<ScalarPathFunctional> brownian_functionals(double horizon) {
  std::vector<ScalarPathFunctional> fs;
  fs.push_back({"terminal", [horizon](const std::vector<double>&, const std::vector<double>& w) {
                  return w.back() / horizon;
                },
                1.5});
  fs.push_back({"sine_avg", [](const std::vector<double>& t, const std::vector<double>& w) {
                  double acc = 0.0;
                  for (std::size_t k = 1; k < w.size(); ++k) {
                    acc += 0.5 * (std::sin(w[k - 1]) + std::sin(w[k])) * (t[k] - t[k - 1]);
                  }
                  return acc / t.back();
                },
                1.5});
  fs.push_back({"pos_avg", [](const std::vector<double>& t, const std::vector<double>& w) {
                  double acc = 0.0;
                  for (std::size_t k = 1; k < w.size(); ++k) {
                    acc += 0.5 * (std::max(w[k - 1], 0.0) + std::max(w[k], 0.0)) * (t[k] - t[k - 1]);
                  }
                  return acc / t.back();
                },
                2.0});
  return fs;
}

std::vector<ScalarPathFunctional> poisson_functionals(double horizon, double lambda) {
  std::vector<ScalarPathFunctional> fs;
  fs.push_back({"count_avg", [horizon](const std::vector<double>&, const std::vector<double>& n) {
                  return n.back() / horizon;
                },
                2.0 * lambda});
  fs.push_back({"above_mean", [lambda](const std::vector<double>& t, const std::vector<double>& n) {
                  double acc = 0.0;
                  for (std::size_t k = 1; k < n.size(); ++k) {
                    acc += (n[k - 1] >= lambda * t[k - 1] ? 1.0 : 0.0) * (t[k] - t[k - 1]);
                  }
                  return acc / t.back();
                },
                1.0});
  return fs;
}

TiltFunction random_brownian_tilt(std::mt19937_64& eng, double horizon, std::string& id) {
  std::uniform_real_distribution<double> uni(-1.2, 1.2);
  std::uniform_int_distribution<int> kind(0, 2);
  std::ostringstream name;
  switch (kind(eng)) {
    case 0: {
      Vector v(1);
      v[0] = uni(eng);
      name << "const(" << format_g17(v[0]) << ")";
      id = name.str();
      return TiltFunction::constant(v);
    }
    case 1: {
      std::vector<double> knots{0.25 * horizon, 0.5 * horizon, 0.75 * horizon};
      std::vector<Vector> vals;
      name << "table(";
      for (int s = 0; s < 4; ++s) {
        Vector v(1);
        v[0] = uni(eng);
        vals.push_back(v);
        name << (s ? "," : "") << format_g17(v[0]);
      }
      name << ")";
      id = name.str();
      return TiltFunction::time_table(std::move(knots), std::move(vals));
    }
    default: {
      const double a = uni(eng);
      name << "feedback(tanh," << format_g17(a) << ")";
      id = name.str();
      return TiltFunction::feedback(1, [a](const Vector& x) {
        Vector v(1);
        v[0] = a * std::tanh(0.5 * x[0]);
        return v;
      });
    }
  }
}

TiltFunction random_poisson_tilt(std::mt19937_64& eng, double horizon, std::string& id) {
  std::uniform_real_distribution<double> uni(0.6, 1.8);
  std::uniform_int_distribution<int> kind(0, 2);
  std::ostringstream name;
  switch (kind(eng)) {
    case 0: {
      Vector v(1);
      v[0] = uni(eng);
      name << "const(" << format_g17(v[0]) << ")";
      id = name.str();
      return TiltFunction::constant(v);
    }
    case 1: {
      std::vector<double> knots{0.25 * horizon, 0.5 * horizon, 0.75 * horizon};
      std::vector<Vector> vals;
      name << "table(";
      for (int s = 0; s < 4; ++s) {
        Vector v(1);
        v[0] = uni(eng);
        vals.push_back(v);
        name << (s ? "," : "") << format_g17(v[0]);
      }
      name << ")";
      id = name.str();
      return TiltFunction::time_table(std::move(knots), std::move(vals));
    }
    default: {
      const double a = 0.3 * (uni(eng) - 1.2);
      name << "feedback(sin," << format_g17(a) << ")";
      id = name.str();
      return TiltFunction::feedback(1, [a](const Vector& count) {
        Vector v(1);
        v[0] = 1.0 + a * std::sin(count[0] + 1.0);
        return v;
      });
    }
  }
}

}  // namespace

VariationalResult variational_report(const ExperimentConfig& cfg) {
  VariationalResult result;
  const double horizon = 4.0;
  const double dt = 1.0 / 64.0;
  const double lambda = 1.0;
  const int reps = std::max(cfg.replications, 4000);
  const int battery = 20;

  const auto bm_fs = brownian_functionals(horizon);
  const auto pp_fs = poisson_functionals(horizon, lambda);

  std::mt19937_64 eng(derive_seed(cfg.seed, 0xb7ull));
  for (int k = 0; k < battery; ++k) {
    std::string id;
    const TiltFunction w = random_brownian_tilt(eng, horizon, id);
    const ScalarPathFunctional& G = bm_fs[k % bm_fs.size()];
    CertificateRecord rec = brownian_certificate(G, w, horizon, dt, reps,
                                                 derive_seed(cfg.seed, 100 + k), id);
    rec.tilt_id = G.name + ":" + id;
    result.brownian.push_back(rec);
  }
  for (int k = 0; k < battery; ++k) {
    std::string id;
    const TiltFunction phi = random_poisson_tilt(eng, horizon, id);
    const ScalarPathFunctional& G = pp_fs[k % pp_fs.size()];
    CertificateRecord rec = poisson_certificate(G, phi, lambda, horizon, dt, reps,
                                                derive_seed(cfg.seed, 200 + k), id);
    rec.tilt_id = G.name + ":" + id;
    result.poisson.push_back(rec);
  }

  result.table.columns = {"kind",  "tilt",          "estimate", "stderr",
                          "direct", "direct_stderr", "verdict",  "heavy_tail"};
  auto push = [&](const char* kind, const CertificateRecord& rec) {
    result.all_ok = result.all_ok && rec.ok;
    result.table.add_row({kind, rec.tilt_id, Table::num(rec.estimate), Table::num(rec.std_error),
                          Table::num(rec.direct), Table::num(rec.direct_std_error),
                          rec.ok ? "ok" : "violated", rec.heavy_tail ? "yes" : "no"});
  };
  for (const auto& rec : result.brownian) push("brownian", rec);
  for (const auto& rec : result.poisson) push("poisson", rec);
  return result;
}

// --- fclt ----------------------------------------------------------------------------

FcltResult fclt_report(const ExperimentConfig&, const std::vector<double>& c_list,
                       const std::vector<double>& lambda_list, const std::vector<double>& n_list) {
  FcltResult result;
  result.table.columns = {"c", "lambda", "n", "poisson_side", "bm_side", "gap", "bound", "ok"};
  for (double c : c_list) {
    for (double lam : lambda_list) {
      for (double n : n_list) {
        const FcltCheck check = fclt_linear_check(c, lam, n);
        result.checks.push_back(check);
        result.all_ok = result.all_ok && check.ok;
        result.table.add_row({Table::num(c), Table::num(lam), Table::num(n),
                              Table::num(check.poisson_side), Table::num(check.bm_side),
                              Table::num(std::abs(check.poisson_side - check.bm_side)),
                              Table::num(check.bound), check.ok ? "ok" : "violated"});
      }
    }
  }
  return result;
}

// --- lower bound ------------------------------------------------------------------------

namespace {

struct EffectiveMaxField {
  const VectorField* field = nullptr;
  double l = 0.0;

  /// chi_l-tapered game maximizer: continuous, zero outside the truncation
  /// ball, exactly the drift perturbation the game equation applies.
  Vector operator()(const Vector& x) const {
    return radial_cutoff(x, l) * field->eval(x);
  }
};

}  // namespace

LowerBoundResult lower_bound_report(const ExperimentConfig& cfg) {
  const LimitParams& p = cfg.params;
  LowerBoundResult result;

  const Grid grid = Grid::cube(p.d, cfg.grid_extent, cfg.grid_h);
  const HjbSolution diffusion = hjb_solve(p, grid, hjb_options(cfg));
  result.lambda = diffusion.value;

  const double l = cfg.game_l_list.back();
  const Grid game_grid = Grid::cube(p.d, cfg.game_grid_extent, cfg.game_grid_h);
  const GameSolution game = game_solve(p, l, game_grid, hjb_options(cfg));
  result.rho_l = game.value;
  // delta against the same discretization the game used
  result.delta = hjb_solve(p, game_grid, hjb_options(cfg)).value - game.value;

  const EffectiveMaxField w_eff{&game.max_control, l};
  double sup_w = 0.0;
  for (std::int64_t idx = 0; idx < game_grid.size(); ++idx) {
    sup_w = std::max(sup_w, w_eff(game_grid.coords(idx)).norm());
  }

  const MarkovControl v_delta =
      blend_control(diffusion, p, cfg.vdelta_radius, cfg.vdelta_k, u0_vertex(cfg));

  for (int n : cfg.n_list) {
    LowerBoundRow row;
    row.n = n;
    try {
      const SystemN sys = SystemN::embed(p, n);
      const SchedulingPolicy policy = policy_from_control(v_delta, sys, p);
      const TiltControl tilt = make_lowerbound_tilt(
          [&w_eff](const Vector& x) { return w_eff(x); }, sup_w, sys);

      OccupationHistogram hist(grid);
      std::vector<double> payoffs(static_cast<std::size_t>(cfg.replications));
      std::vector<PathRecord> paths(static_cast<std::size_t>(cfg.replications));
      parallel_for(payoffs.size(), [&](std::size_t rep) {
        paths[rep] = simulate_tilted(sys, p, policy, tilt, start_state(sys, p), cfg.horizon,
                                     derive_seed(cfg.seed, 50000 + 1000 * n + rep));
        payoffs[rep] = (paths[rep].cost_integral - paths[rep].entropy_integral) / cfg.horizon;
        // only times and states feed the histogram below
        paths[rep].trace = TiltTrace{};
        paths[rep].alloc_flat.clear();
        paths[rep].cost_at.clear();
        paths[rep].entropy_at.clear();
      });
      for (const PathRecord& path : paths) {
        const std::size_t segments = path.t.size() + 1;
        Vector xhat(p.d);
        for (std::size_t k = 0; k < segments; ++k) {
          const double t0 = (k == 0) ? 0.0 : path.t[k - 1];
          const double t1 = (k < path.t.size()) ? path.t[k] : path.t_end;
          if (t1 <= t0) continue;
          for (int i = 0; i < p.d; ++i) {
            xhat[i] = (path.state_flat[k * p.d + i] - sys.n * p.rho[i]) / sys.sqrt_n;
          }
          hist.deposit(xhat, t1 - t0);
        }
      }

      double mean = 0.0;
      for (double v : payoffs) mean += v;
      mean /= static_cast<double>(payoffs.size());
      double var = 0.0;
      for (double v : payoffs) var += (v - mean) * (v - mean);
      row.payoff = mean;
      row.payoff_se = payoffs.size() > 1
                          ? std::sqrt(var / (static_cast<double>(payoffs.size()) - 1.0) /
                                      static_cast<double>(payoffs.size()))
                          : 0.0;

      // Histogram integral of r(x, v(x)) minus the limiting entropy rate of
      // the applied tilt, (1/2) sum_i (lambda_i + mu_i) w_i^2.
      const std::vector<double> mass = hist.state_marginal();
      KahanSum integral;
      double max_gap = 0.0, max_env = 0.0;
      for (std::int64_t idx = 0; idx < grid.size(); ++idx) {
        const double m = mass[static_cast<std::size_t>(idx)];
        const Vector x = grid.coords(idx);
        const Vector w = w_eff(x);
        double quad = 0.0;
        for (int i = 0; i < p.d; ++i) quad += 0.5 * (p.lambda[i] + p.mu[i]) * w[i] * w[i];
        if (m > 0.0) {
          integral.add(m * (running_cost(x, v_delta(x), p) - quad));
        }
        // Exact per-state comparison of the finite-n entropy rate with its
        // quadratic limit, cubic-remainder envelope.
        double ent = 0.0, env = 0.0;
        for (int i = 0; i < p.d; ++i) {
          const double r = -w[i] / sys.sqrt_n;
          if (std::abs(r) >= 1.0) continue;
          ent += sys.lambda_n[i] * poisson_kl(1.0 + r) + sys.n * sys.mu_n[i] * poisson_kl(1.0 + r);
          const double a = std::abs(r);
          env += (sys.lambda_n[i] + sys.n * sys.mu_n[i]) * a * a * a /
                 (6.0 * (1.0 - a) * (1.0 - a));
        }
        max_gap = std::max(max_gap, std::abs(ent - quad));
        max_env = std::max(max_env, env);
      }
      row.diffusion_side = integral.value() / hist.total_time();
      row.entropy_gap = max_gap;
      row.entropy_envelope = max_env;
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    result.rows.push_back(row);
  }

  result.table.columns = {"n",       "payoff",       "payoff_se",   "diffusion_side",
                          "lambda",  "rho_l",        "entropy_gap", "entropy_envelope",
                          "status"};
  for (const LowerBoundRow& row : result.rows) {
    result.table.add_row({std::to_string(row.n),
                          row.ok ? Table::num(row.payoff) : "",
                          row.ok ? Table::num(row.payoff_se) : "",
                          row.ok ? Table::num(row.diffusion_side) : "",
                          Table::num(result.lambda), Table::num(result.rho_l),
                          row.ok ? Table::num(row.entropy_gap) : "",
                          row.ok ? Table::num(row.entropy_envelope) : "",
                          row.ok ? "ok" : ("failed: " + row.error)});
  }
  return result;
}

// --- upper bound -------------------------------------------------------------------------------

UpperBoundResult upper_bound_report(const ExperimentConfig& cfg) {
  const LimitParams& p = cfg.params;
  UpperBoundResult result;

  const Grid grid = Grid::cube(p.d, cfg.grid_extent, cfg.grid_h);
  const HjbSolution diffusion = hjb_solve(p, grid, hjb_options(cfg));
  result.lambda = diffusion.value;
  const MarkovControl v_delta =
      blend_control(diffusion, p, cfg.vdelta_radius, cfg.vdelta_k, u0_vertex(cfg));

  LyapunovWitness witness;
  witness.eps0 = cfg.eps0;
  witness.eps1 = cfg.eps1;
  witness.mu = p.mu;

  for (int n : cfg.n_list) {
    UpperBoundRow row;
    row.n = n;
    try {
      const SystemN sys = SystemN::embed(p, n);
      const LatticeBox box = LatticeBox::around_load(sys, p, cfg.box_margin);
      const SchedulingPolicy policy = policy_from_control(v_delta, sys, p);
      row.value_under_v = prelimit_value_under_control(v_delta, sys, p, box, power_options(cfg)).value;
      row.gap = row.value_under_v - result.lambda;

      KahanSum frac, d1, d2;
      for (int rep = 0; rep < cfg.replications; ++rep) {
        const PathRecord path = simulate(sys, p, policy, start_state(sys, p), cfg.horizon,
                                         derive_seed(cfg.seed, 70000 + 1000 * n + rep));
        const ExcursionStats stats = excursion_stats(path, sys, p, v_delta);
        frac.add(stats.fraction_outside);
        d1.add(stats.delta1);
        d2.add(stats.delta2);
      }
      row.excursion_fraction = frac.value() / cfg.replications;
      row.delta1 = d1.value() / cfg.replications;
      row.delta2 = d2.value() / cfg.replications;

      const DriftReport drift = drift_report(sys, p, policy, TiltControl::identity(p.d),
                                             cfg.shell_radius, witness, cfg.drift_weight,
                                             cfg.drift_certificate);
      row.drift_c0 = drift.fitted.c0;
      row.drift_c1 = drift.fitted.c1;
      row.drift_ok = drift.fitted_holds && drift.fitted.c1 > 0.0;
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    result.rows.push_back(row);
  }

  result.table.columns = {"n",        "value_under_v", "lambda",   "gap",
                          "excursion", "delta1",        "delta2",   "drift_c0",
                          "drift_c1", "drift_ok",      "status"};
  for (const UpperBoundRow& row : result.rows) {
    result.table.add_row({std::to_string(row.n),
                          row.ok ? Table::num(row.value_under_v) : "",
                          Table::num(result.lambda),
                          row.ok ? Table::num(row.gap) : "",
                          row.ok ? Table::num(row.excursion_fraction) : "",
                          row.ok ? Table::num(row.delta1) : "",
                          row.ok ? Table::num(row.delta2) : "",
                          row.ok ? Table::num(row.drift_c0) : "",
                          row.ok ? Table::num(row.drift_c1) : "",
                          row.ok ? (row.drift_ok ? "yes" : "no") : "",
                          row.ok ? "ok" : ("failed: " + row.error)});
  }
  return result;
}

// --- drift check -----------------------------------------------------------------------------

DriftCheckResult drift_check_report(const ExperimentConfig& cfg) {
  const LimitParams& p = cfg.params;
  DriftCheckResult result;
  LyapunovWitness witness;
  witness.eps0 = cfg.eps0;
  witness.eps1 = cfg.eps1;
  witness.mu = p.mu;

  result.table.columns = {"n",  "states",    "sup_drift", "sup_modified", "fitted_c0",
                          "fitted_c1", "fitted_ok", "configured_ok"};
  for (int n : cfg.n_list) {
    const SystemN sys = SystemN::embed(p, n);
    const DriftReport report =
        drift_report(sys, p, priority_policy(p.d, n), TiltControl::identity(p.d),
                     cfg.shell_radius, witness, cfg.drift_weight, cfg.drift_certificate);
    result.table.add_row({std::to_string(n), std::to_string(report.states),
                          Table::num(report.sup_drift), Table::num(report.sup_modified),
                          Table::num(report.fitted.c0), Table::num(report.fitted.c1),
                          report.fitted_holds ? "yes" : "no",
                          report.configured_given ? (report.configured_holds ? "yes" : "no") : "-"});
    result.reports.push_back(report);
  }
  return result;
}

// --- simulate -------------------------------------------------------------------------------

PathRecord simulate_experiment(const ExperimentConfig& cfg) {
  if (cfg.n_list.empty()) throw ConfigError("n_list must not be empty");
  const SystemN sys = SystemN::embed(cfg.params, cfg.n_list.front());
  return simulate(sys, cfg.params, priority_policy(cfg.params.d, sys.n), start_state(sys, cfg.params),
                  cfg.horizon, cfg.seed);
}

}  // namespace ersc
