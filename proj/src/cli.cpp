#include "ersc/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "ersc/config.hpp"
#include "ersc/experiments.hpp"
#include "ersc/table.hpp"
#include "ersc/util.hpp"

namespace ersc {

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format;
};

void attach_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key-value config file (defaults to the built-in instance)");
  cmd->add_option("--seed", args.seed, "seed override");
  cmd->add_option("--out", args.out, "output path (stdout when omitted)");
  cmd->add_option("--format", args.format, "csv or txt")->check(CLI::IsMember({"csv", "txt"}));
}

ExperimentConfig load_config(const CommonArgs& args) {
  ExperimentConfig cfg = args.config_path.empty() ? ExperimentConfig::reference()
                                                  : ExperimentConfig::from_file(args.config_path);
  if (args.seed.has_value()) cfg.seed = *args.seed;
  if (!args.out.empty()) cfg.out = args.out;
  if (!args.format.empty()) cfg.format = args.format;
  return cfg;
}

std::string preamble(const ExperimentConfig& cfg) {
  return "seed " + std::to_string(cfg.seed) + "\n" + cfg.echo;
}

void write_table(const Table& table, const ExperimentConfig& cfg) {
  if (cfg.out.empty()) {
    emit(table, std::cout, cfg.format, preamble(cfg));
  } else {
    emit_file(table, cfg.out, cfg.format, preamble(cfg));
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"ergodic risk-sensitive control toolkit for multiclass many-server queues"};
  app.require_subcommand(1);

  CommonArgs ao_args, lb_args, ub_args, var_args, fclt_args, drift_args, sim_args;
  CLI::App* ao = app.add_subcommand("ao-table", "pre-limit vs diffusion value convergence table");
  attach_common(ao, ao_args);
  CLI::App* lb = app.add_subcommand("lower-bound", "tilted-simulation lower-bound pipeline");
  attach_common(lb, lb_args);
  CLI::App* ub = app.add_subcommand("upper-bound", "constructed-policy upper-bound pipeline");
  attach_common(ub, ub_args);
  CLI::App* var = app.add_subcommand("variational", "Monte Carlo certificate batteries");
  attach_common(var, var_args);
  CLI::App* fclt = app.add_subcommand("fclt", "closed-form scaled-Poisson vs Brownian checks");
  attach_common(fclt, fclt_args);
  CLI::App* drift = app.add_subcommand("drift-check", "Lyapunov drift certificate on the shell");
  attach_common(drift, drift_args);
  CLI::App* sim = app.add_subcommand("simulate", "single event-driven path export");
  attach_common(sim, sim_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (ao->parsed()) {
      const ExperimentConfig cfg = load_config(ao_args);
      write_table(ao_table(cfg).table, cfg);
    } else if (lb->parsed()) {
      const ExperimentConfig cfg = load_config(lb_args);
      write_table(lower_bound_report(cfg).table, cfg);
    } else if (ub->parsed()) {
      const ExperimentConfig cfg = load_config(ub_args);
      write_table(upper_bound_report(cfg).table, cfg);
    } else if (var->parsed()) {
      const ExperimentConfig cfg = load_config(var_args);
      write_table(variational_report(cfg).table, cfg);
    } else if (fclt->parsed()) {
      const ExperimentConfig cfg = load_config(fclt_args);
      write_table(fclt_report(cfg).table, cfg);
    } else if (drift->parsed()) {
      const ExperimentConfig cfg = load_config(drift_args);
      write_table(drift_check_report(cfg).table, cfg);
    } else if (sim->parsed()) {
      const ExperimentConfig cfg = load_config(sim_args);
      const PathRecord path = simulate_experiment(cfg);
      if (cfg.out.empty()) {
        write_path(std::cout, path, cfg.echo);
      } else {
        std::ofstream os(cfg.out);
        if (!os) throw IoError("cannot open output file: " + cfg.out);
        write_path(os, path, cfg.echo);
        if (!os) throw IoError("write failed: " + cfg.out);
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace ersc
