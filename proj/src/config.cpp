#include "ersc/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "ersc/util.hpp"

namespace ersc {

std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// --- KeyValues ------------------------------------------------------------------

KeyValues KeyValues::parse_string(const std::string& text) {
  KeyValues kv;
  kv.raw_ = text;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      std::istringstream probe(line);
      std::string token;
      if (probe >> token) {
        throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
      }
      continue;
    }
    std::istringstream keystream(line.substr(0, eq));
    std::string key;
    keystream >> key;
    std::string extra;
    if (key.empty() || (keystream >> extra)) {
      throw ConfigError("config line " + std::to_string(lineno) + ": malformed key");
    }
    std::istringstream valstream(line.substr(eq + 1));
    std::vector<std::string> tokens;
    std::string tok;
    while (valstream >> tok) tokens.push_back(tok);
    kv.values_[key] = tokens;
  }
  return kv;
}

KeyValues KeyValues::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

bool KeyValues::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KeyValues::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end() || it->second.empty()) {
    throw ConfigError("missing config value: " + key);
  }
  if (it->second.size() != 1) throw ConfigError("config key " + key + " expects one value");
  return it->second.front();
}

namespace {

double parse_number(const std::string& token, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": cannot parse number '" + token + "'");
  }
}

}  // namespace

double KeyValues::get_number(const std::string& key) const {
  return parse_number(get_string(key), key);
}

std::int64_t KeyValues::get_integer(const std::string& key) const {
  const double v = get_number(key);
  if (std::floor(v) != v) throw ConfigError("config key " + key + " expects an integer");
  return static_cast<std::int64_t>(v);
}

std::vector<double> KeyValues::get_numbers(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end() || it->second.empty()) {
    throw ConfigError("missing config value: " + key);
  }
  std::vector<double> out;
  out.reserve(it->second.size());
  for (const std::string& tok : it->second) out.push_back(parse_number(tok, key));
  return out;
}

std::vector<int> KeyValues::get_integers(const std::string& key) const {
  std::vector<int> out;
  for (double v : get_numbers(key)) {
    if (std::floor(v) != v) throw ConfigError("config key " + key + " expects integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<std::string> KeyValues::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) out.push_back(k);
  return out;
}

// --- ExperimentConfig -----------------------------------------------------------------

ExperimentConfig ExperimentConfig::reference() {
  ExperimentConfig cfg;
  Vector lambda(2), mu(2), gamma(2), kappa(2), zero(2);
  lambda << 0.5, 0.5;
  mu << 1.0, 1.0;
  gamma << 0.5, 1.0;
  kappa << 0.2, 0.4;
  zero << 0.0, 0.0;
  cfg.params = LimitParams::create(lambda, zero, mu, zero, gamma, kappa);
  cfg.echo = cfg.serialize();
  return cfg;
}

namespace {

Vector to_vector(const std::vector<double>& v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "d",           "lambda",          "lambda_hat",     "mu",
      "mu_hat",      "gamma",           "kappa",          "n_list",
      "box_margin",  "grid_extent",     "grid_h",         "hjb_tol",
      "hjb_max_outer", "u0_class",      "eigen_tol",      "eigen_max_iter", "truncation_sweep",
      "game_l_list", "game_grid_extent", "game_grid_h",   "vdelta_radius",
      "vdelta_k",    "horizon",         "replications",   "dt",
      "shell_radius", "eps0",           "eps1",           "drift_weight",
      "drift_c0",    "drift_c1",        "seed",           "out",
      "format"};
  return keys;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_keyvalues(const KeyValues& kv) {
  for (const std::string& key : kv.keys()) {
    if (known_keys().count(key) == 0) throw ConfigError("unknown config key: " + key);
  }

  ExperimentConfig cfg = reference();
  cfg.echo = kv.raw_text();

  if (kv.has("lambda")) {
    const Vector lambda = to_vector(kv.get_numbers("lambda"));
    const int d = static_cast<int>(lambda.size());
    if (kv.has("d") && kv.get_integer("d") != d) {
      throw ConfigError("config key d disagrees with the length of lambda");
    }
    const Vector mu = to_vector(kv.get_numbers("mu"));
    const Vector gamma = to_vector(kv.get_numbers("gamma"));
    const Vector kappa = to_vector(kv.get_numbers("kappa"));
    const Vector lambda_hat =
        kv.has("lambda_hat") ? to_vector(kv.get_numbers("lambda_hat")) : Vector::Zero(d);
    const Vector mu_hat = kv.has("mu_hat") ? to_vector(kv.get_numbers("mu_hat")) : Vector::Zero(d);
    cfg.params = LimitParams::create(lambda, lambda_hat, mu, mu_hat, gamma, kappa);
  } else if (kv.has("mu") || kv.has("gamma") || kv.has("kappa")) {
    throw ConfigError("partial parameter set: lambda, mu, gamma, kappa must appear together");
  }

  if (kv.has("n_list")) cfg.n_list = kv.get_integers("n_list");
  if (kv.has("box_margin")) cfg.box_margin = kv.get_number("box_margin");
  if (kv.has("grid_extent")) cfg.grid_extent = kv.get_number("grid_extent");
  if (kv.has("grid_h")) cfg.grid_h = kv.get_number("grid_h");
  if (kv.has("hjb_tol")) cfg.hjb_tol = kv.get_number("hjb_tol");
  if (kv.has("hjb_max_outer")) cfg.hjb_max_outer = static_cast<int>(kv.get_integer("hjb_max_outer"));
  if (kv.has("u0_class")) cfg.u0_class = static_cast<int>(kv.get_integer("u0_class"));
  if (cfg.u0_class < 0 || cfg.u0_class > cfg.params.d) {
    throw ConfigError("u0_class must lie in 1..d (0 selects the last class)");
  }
  if (kv.has("eigen_tol")) cfg.eigen_tol = kv.get_number("eigen_tol");
  if (kv.has("eigen_max_iter")) cfg.eigen_max_iter = kv.get_integer("eigen_max_iter");
  if (kv.has("truncation_sweep")) cfg.truncation_sweep = kv.get_integer("truncation_sweep") != 0;
  if (kv.has("game_l_list")) cfg.game_l_list = kv.get_numbers("game_l_list");
  if (kv.has("game_grid_extent")) cfg.game_grid_extent = kv.get_number("game_grid_extent");
  if (kv.has("game_grid_h")) cfg.game_grid_h = kv.get_number("game_grid_h");
  if (kv.has("vdelta_radius")) cfg.vdelta_radius = kv.get_number("vdelta_radius");
  if (kv.has("vdelta_k")) cfg.vdelta_k = static_cast<int>(kv.get_integer("vdelta_k"));
  if (kv.has("horizon")) cfg.horizon = kv.get_number("horizon");
  if (kv.has("replications")) cfg.replications = static_cast<int>(kv.get_integer("replications"));
  if (kv.has("dt")) cfg.dt = kv.get_number("dt");
  if (kv.has("shell_radius")) cfg.shell_radius = kv.get_number("shell_radius");
  if (kv.has("eps0")) cfg.eps0 = kv.get_number("eps0");
  if (kv.has("eps1")) cfg.eps1 = kv.get_number("eps1");
  if (kv.has("drift_weight")) cfg.drift_weight = kv.get_number("drift_weight");
  if (kv.has("drift_c0") != kv.has("drift_c1")) {
    throw ConfigError("drift_c0 and drift_c1 must be given together");
  }
  if (kv.has("drift_c0")) {
    cfg.drift_certificate = DriftCertificate{kv.get_number("drift_c0"), kv.get_number("drift_c1")};
  }
  if (kv.has("seed")) cfg.seed = static_cast<std::uint64_t>(kv.get_integer("seed"));
  if (kv.has("out")) cfg.out = kv.get_string("out");
  if (kv.has("format")) cfg.format = kv.get_string("format");

  if (cfg.horizon <= 0.0 || cfg.dt <= 0.0) throw ConfigError("horizon and dt must be positive");
  if (cfg.replications < 1) throw ConfigError("replications must be at least 1");
  if (cfg.format != "csv" && cfg.format != "txt") {
    throw ConfigError("unknown format '" + cfg.format + "'; supported formats: csv, txt");
  }
  for (int n : cfg.n_list) {
    if (n < 1) throw ConfigError("n_list entries must be positive");
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  return from_keyvalues(KeyValues::parse_file(path));
}

namespace {

void write_vector(std::ostringstream& os, const char* key, const Vector& v) {
  os << key << " =";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << " " << format_g17(v[i]);
  os << "\n";
}

}  // namespace

std::string ExperimentConfig::serialize() const {
  std::ostringstream os;
  os << "d = " << params.d << "\n";
  write_vector(os, "lambda", params.lambda);
  write_vector(os, "lambda_hat", params.lambda_hat);
  write_vector(os, "mu", params.mu);
  write_vector(os, "mu_hat", params.mu_hat);
  write_vector(os, "gamma", params.gamma);
  write_vector(os, "kappa", params.kappa);
  os << "n_list =";
  for (int n : n_list) os << " " << n;
  os << "\n";
  os << "box_margin = " << format_g17(box_margin) << "\n";
  os << "grid_extent = " << format_g17(grid_extent) << "\n";
  os << "grid_h = " << format_g17(grid_h) << "\n";
  os << "hjb_tol = " << format_g17(hjb_tol) << "\n";
  os << "hjb_max_outer = " << hjb_max_outer << "\n";
  os << "u0_class = " << u0_class << "\n";
  os << "eigen_tol = " << format_g17(eigen_tol) << "\n";
  os << "eigen_max_iter = " << eigen_max_iter << "\n";
  os << "truncation_sweep = " << (truncation_sweep ? 1 : 0) << "\n";
  os << "game_l_list =";
  for (double l : game_l_list) os << " " << format_g17(l);
  os << "\n";
  os << "game_grid_extent = " << format_g17(game_grid_extent) << "\n";
  os << "game_grid_h = " << format_g17(game_grid_h) << "\n";
  os << "vdelta_radius = " << format_g17(vdelta_radius) << "\n";
  os << "vdelta_k = " << vdelta_k << "\n";
  os << "horizon = " << format_g17(horizon) << "\n";
  os << "replications = " << replications << "\n";
  os << "dt = " << format_g17(dt) << "\n";
  os << "shell_radius = " << format_g17(shell_radius) << "\n";
  os << "eps0 = " << format_g17(eps0) << "\n";
  os << "eps1 = " << format_g17(eps1) << "\n";
  os << "drift_weight = " << format_g17(drift_weight) << "\n";
  if (drift_certificate.has_value()) {
    os << "drift_c0 = " << format_g17(drift_certificate->c0) << "\n";
    os << "drift_c1 = " << format_g17(drift_certificate->c1) << "\n";
  }
  os << "seed = " << seed << "\n";
  if (!out.empty()) os << "out = " << out << "\n";
  os << "format = " << format << "\n";
  return os.str();
}

}  // namespace ersc
