#ifndef ERSC_EXPERIMENTS_HPP
#define ERSC_EXPERIMENTS_HPP

#include <optional>
#include <string>
#include <vector>

#include "ersc/config.hpp"
#include "ersc/ctmc.hpp"
#include "ersc/hjb.hpp"
#include "ersc/lyapunov.hpp"
#include "ersc/spectral.hpp"
#include "ersc/table.hpp"
#include "ersc/variational.hpp"

namespace ersc {

// --- Asymptotic-optimality table ------------------------------------------------

struct AoRow {
  int n = 0;
  bool ok = false;
  double value_n = 0.0;     // pre-limit optimal value
  double gap = 0.0;         // |value_n - lambda|
  std::string truncation;   // "ok", "drift", or "-" when the sweep is off
  std::string error;
};

struct AoResult {
  double lambda = 0.0;  // diffusion value, solved once and shared by all rows
  std::vector<AoRow> rows;
  Table table;
};

AoResult ao_table(const ExperimentConfig& cfg);

// --- Variational certificate battery ----------------------------------------------

struct VariationalResult {
  std::vector<CertificateRecord> brownian;
  std::vector<CertificateRecord> poisson;
  Table table;
  bool all_ok = true;
};

VariationalResult variational_report(const ExperimentConfig& cfg);

// --- FCLT sweep ----------------------------------------------------------------------

struct FcltResult {
  std::vector<FcltCheck> checks;
  Table table;
  bool all_ok = true;
};

FcltResult fclt_report(const ExperimentConfig& cfg,
                       const std::vector<double>& c_list = {0.5, 1.0, 2.0},
                       const std::vector<double>& lambda_list = {0.5, 1.0, 2.0},
                       const std::vector<double>& n_list = {1e2, 1e4, 1e6});

// --- Lower-bound pipeline ---------------------------------------------------------------

struct LowerBoundRow {
  int n = 0;
  bool ok = false;
  double payoff = 0.0;          // mean of (cost - entropy)/T over replications
  double payoff_se = 0.0;
  double diffusion_side = 0.0;  // histogram integral of r - 0.5 ||w||^2
  double entropy_gap = 0.0;     // sup_x |entropy rate - quadratic payoff|
  double entropy_envelope = 0.0;
  std::string error;
};

struct LowerBoundResult {
  double lambda = 0.0;
  double rho_l = 0.0;     // game value at the pipeline truncation radius
  double delta = 0.0;     // lambda - rho_l
  std::vector<LowerBoundRow> rows;
  Table table;
};

LowerBoundResult lower_bound_report(const ExperimentConfig& cfg);

// --- Upper-bound pipeline ------------------------------------------------------------------

struct UpperBoundRow {
  int n = 0;
  bool ok = false;
  double value_under_v = 0.0;  // pre-limit value of the constructed policy
  double gap = 0.0;            // value_under_v - lambda
  double excursion_fraction = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double drift_c0 = 0.0;
  double drift_c1 = 0.0;
  bool drift_ok = false;
  std::string error;
};

struct UpperBoundResult {
  double lambda = 0.0;
  std::vector<UpperBoundRow> rows;
  Table table;
};

UpperBoundResult upper_bound_report(const ExperimentConfig& cfg);

// --- Drift certificate check ------------------------------------------------------------------

struct DriftCheckResult {
  std::vector<DriftReport> reports;  // one per n
  Table table;
};

DriftCheckResult drift_check_report(const ExperimentConfig& cfg);

// --- Single-path simulation --------------------------------------------------------------------

PathRecord simulate_experiment(const ExperimentConfig& cfg);

/// Work-conserving static-priority policy (always feasible).
SchedulingPolicy priority_policy(int d, int n);

}  // namespace ersc

#endif  // ERSC_EXPERIMENTS_HPP
