#ifndef ERSC_CONFIG_HPP
#define ERSC_CONFIG_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ersc/lyapunov.hpp"
#include "ersc/model.hpp"

namespace ersc {

/// `key = value...` text, one pair per line, '#' comments. Values are
/// whitespace-separated tokens; numbers round-trip at 17 significant digits.
class KeyValues {
 public:
  static KeyValues parse_string(const std::string& text);
  static KeyValues parse_file(const std::string& path);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  double get_number(const std::string& key) const;
  std::int64_t get_integer(const std::string& key) const;
  std::vector<double> get_numbers(const std::string& key) const;
  std::vector<int> get_integers(const std::string& key) const;

  std::vector<std::string> keys() const;
  const std::string& raw_text() const { return raw_; }

 private:
  std::map<std::string, std::vector<std::string>> values_;
  std::string raw_;
};

/// Full experiment configuration; unknown keys are rejected.
struct ExperimentConfig {
  LimitParams params;

  std::vector<int> n_list{16, 64, 256};
  double box_margin = 6.0;

  double grid_extent = 6.0;
  double grid_h = 0.125;
  double hjb_tol = 1e-6;
  int hjb_max_outer = 5000;
  int u0_class = 0;  // 1-based boundary/freeze control class; 0 means the last class

  double eigen_tol = 1e-9;
  std::int64_t eigen_max_iter = 1000000;
  bool truncation_sweep = false;

  std::vector<double> game_l_list{1.0, 2.0, 4.0, 8.0};
  double game_grid_extent = 8.0;
  double game_grid_h = 0.25;

  double vdelta_radius = 2.0;  // freeze radius of the constructed control; the
                               // scheduling construction needs this at most
                               // rho_min sqrt(n) for the smallest n in use
  int vdelta_k = 8;

  double horizon = 100.0;
  int replications = 16;
  double dt = 0.01;

  double shell_radius = 2.0;
  double eps0 = 1.0;
  double eps1 = 1.0;
  double drift_weight = 1.0;
  std::optional<DriftCertificate> drift_certificate;

  std::uint64_t seed = 1;
  std::string out;
  std::string format = "csv";

  std::string echo;  // raw config text, reproduced in output preambles

  static ExperimentConfig reference();
  static ExperimentConfig from_keyvalues(const KeyValues& kv);
  static ExperimentConfig from_file(const std::string& path);

  /// Lossless serialization: parsing the result reproduces every numeric
  /// field bit for bit.
  std::string serialize() const;
};

}  // namespace ersc

#endif  // ERSC_CONFIG_HPP
