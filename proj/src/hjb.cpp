#include "ersc/hjb.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <ostream>

#include "ersc/util.hpp"

namespace ersc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

// --- Grid --------------------------------------------------------------------

Grid Grid::symmetric(std::vector<double> extent, double h) {
  if (h <= 0.0) throw ConfigError("grid spacing must be positive");
  Grid g;
  g.d = static_cast<int>(extent.size());
  g.h = h;
  g.extent.resize(g.d);
  g.npts.resize(g.d);
  for (int a = 0; a < g.d; ++a) {
    const int m = std::max(1, static_cast<int>(std::lround(extent[a] / h)));
    g.extent[a] = m * h;  // snapped so the origin is a node
    g.npts[a] = 2 * m + 1;
  }
  return g;
}

Grid Grid::cube(int d, double extent, double h) {
  return symmetric(std::vector<double>(d, extent), h);
}

std::int64_t Grid::size() const {
  std::int64_t s = 1;
  for (int n : npts) s *= n;
  return s;
}

std::int64_t Grid::index_of(const std::vector<int>& multi) const {
  std::int64_t idx = 0;
  for (int a = 0; a < d; ++a) idx = idx * npts[a] + multi[a];
  return idx;
}

std::vector<int> Grid::multi_of(std::int64_t idx) const {
  std::vector<int> multi(d);
  for (int a = d; a-- > 0;) {
    multi[a] = static_cast<int>(idx % npts[a]);
    idx /= npts[a];
  }
  return multi;
}

Vector Grid::coords(std::int64_t idx) const {
  Vector x(d);
  for (int a = d; a-- > 0;) {
    const int i = static_cast<int>(idx % npts[a]);
    idx /= npts[a];
    x[a] = -extent[a] + i * h;
  }
  return x;
}

std::int64_t Grid::origin() const {
  std::vector<int> multi(d);
  for (int a = 0; a < d; ++a) multi[a] = (npts[a] - 1) / 2;
  return index_of(multi);
}

bool Grid::on_boundary(std::int64_t idx) const {
  for (int a = d; a-- > 0;) {
    const int i = static_cast<int>(idx % npts[a]);
    idx /= npts[a];
    if (i == 0 || i == npts[a] - 1) return true;
  }
  return false;
}

std::int64_t Grid::neighbor(std::int64_t idx, int axis, int step) const {
  std::int64_t stride = 1;
  for (int a = d - 1; a > axis; --a) stride *= npts[a];
  const int i = static_cast<int>((idx / stride) % npts[axis]);
  const int j = i + step;
  if (j < 0 || j >= npts[axis]) return -1;
  return idx + static_cast<std::int64_t>(step) * stride;
}

double Grid::min_extent() const {
  double m = kInf;
  for (double e : extent) m = std::min(m, e);
  return m;
}

// --- VectorField ----------------------------------------------------------------

Vector VectorField::at_node(std::int64_t idx) const {
  Vector v(dim_out);
  for (int j = 0; j < dim_out; ++j) v[j] = data[static_cast<std::size_t>(idx) * dim_out + j];
  return v;
}

void VectorField::set_node(std::int64_t idx, const Vector& v) {
  for (int j = 0; j < dim_out; ++j) data[static_cast<std::size_t>(idx) * dim_out + j] = v[j];
}

Vector VectorField::eval(const Vector& x) const {
  const int d = grid.d;
  std::vector<int> base(d);
  std::vector<double> frac(d);
  for (int a = 0; a < d; ++a) {
    double pos = (x[a] + grid.extent[a]) / grid.h;
    pos = std::clamp(pos, 0.0, static_cast<double>(grid.npts[a] - 1));
    int i0 = std::min(static_cast<int>(pos), grid.npts[a] - 2);
    i0 = std::max(i0, 0);
    base[a] = i0;
    frac[a] = std::clamp(pos - i0, 0.0, 1.0);
  }
  Vector out = Vector::Zero(dim_out);
  std::vector<int> multi(d);
  const int corners = 1 << d;
  for (int c = 0; c < corners; ++c) {
    double weight = 1.0;
    for (int a = 0; a < d; ++a) {
      const bool hi = (c >> a) & 1;
      multi[a] = base[a] + (hi ? 1 : 0);
      weight *= hi ? frac[a] : (1.0 - frac[a]);
    }
    if (weight == 0.0) continue;
    out += weight * at_node(grid.index_of(multi));
  }
  return out;
}

double VectorField::sup_norm() const {
  double best = 0.0;
  const std::int64_t n = grid.size();
  for (std::int64_t idx = 0; idx < n; ++idx) best = std::max(best, at_node(idx).norm());
  return best;
}

// --- Pointwise pieces --------------------------------------------------------------

int vertex_argmin(const Vector& x, const Vector& grad_phi, const LimitParams& p,
                  double cost_cap) {
  const double pos = std::max(x.sum(), 0.0);
  int best = 0;
  double best_val = kInf;
  for (int i = 0; i < p.d; ++i) {
    const double val =
        pos * (p.mu[i] - p.gamma[i]) * grad_phi[i] + std::min(pos * p.kappa[i], cost_cap);
    if (val < best_val) {
      best_val = val;
      best = i;
    }
  }
  return best;
}

Vector vertex_minimizer(const Vector& x, const Vector& grad_phi, const LimitParams& p,
                        double cost_cap) {
  return simplex_vertex(p.d, vertex_argmin(x, grad_phi, p, cost_cap));
}

double radial_cutoff(const Vector& x, double l) {
  if (l == kInf) return 1.0;
  const double r = x.norm();
  if (r <= 0.5 * l) return 1.0;
  if (r >= l) return 0.0;
  const double s = (r - 0.5 * l) / (0.5 * l);
  return 1.0 - s * s * (3.0 - 2.0 * s);
}

// --- Core solver ----------------------------------------------------------------------

namespace {

struct Mode {
  double l = kInf;  // cost cap, maximizer ball radius and cutoff scale
  const MarkovControl* frozen_markov = nullptr;
  const std::vector<std::uint8_t>* frozen_vertex = nullptr;
  const VectorField* frozen_w = nullptr;
};

struct CoreResult {
  double value = 0.0;
  Vector phi;
  std::vector<std::uint8_t> control;
  VectorField w;
  Vector residual_field;
  double residual = 0.0;
  int iterations = 0;
};

class CoreSolver {
 public:
  CoreSolver(const LimitParams& p, const Grid& grid, const HjbOptions& opts, const Mode& mode)
      : p_(p), grid_(grid), opts_(opts), mode_(mode), size_(grid.size()) {
    sigma_ = p.sigma_diag();
    u0_index_ = opts.frozen_vertex >= 0 ? opts.frozen_vertex : p.d - 1;
    coords_.resize(size_);
    chi_.resize(size_);
    boundary_.resize(size_);
    for (std::int64_t idx = 0; idx < size_; ++idx) {
      coords_[idx] = grid.coords(idx);
      chi_[idx] = radial_cutoff(coords_[idx], mode.l);
      boundary_[idx] = grid.on_boundary(idx);
    }
  }

  CoreResult run(const Vector* warm) {
    const int d = p_.d;
    Vector phi = warm != nullptr && warm->size() == size_ ? *warm : Vector::Zero(size_);
    double lam = 0.0;
    double lam_prev = kInf;
    int quiet = 0;

    Eigen::MatrixXd grad(size_, d);
    std::vector<std::uint8_t> control(size_, 0);
    std::vector<std::uint8_t> control_prev;
    Eigen::MatrixXd bfield(size_, d);
    VectorField wfield{grid_, d, std::vector<double>(static_cast<std::size_t>(size_) * d, 0.0)};
    Vector source(size_), cost(size_);

    for (int iter = 1; iter <= opts_.max_outer; ++iter) {
      compute_gradient(phi, grad);
      select_controls(phi, control, bfield, cost);
      select_maximizer(grad, wfield, source);

      if (control_prev != control) {
        assemble_and_factor(bfield);
        control_prev = control;
      }

      Vector residual_field(size_);
      const double res = interior_residual(phi, lam, bfield, source, cost, &residual_field);
      quiet = std::abs(lam - lam_prev) <= opts_.value_tol ? quiet + 1 : 0;
      lam_prev = lam;
      if (res <= opts_.residual_tol && quiet >= opts_.value_window) {
        CoreResult out;
        out.value = lam;
        out.phi = phi;
        out.phi.array() -= out.phi[grid_.origin()];  // anchor exactly zero
        out.control = control;
        out.w = wfield;
        out.residual_field = std::move(residual_field);
        out.residual = res;
        out.iterations = iter;
        return out;
      }

      // Linear solve with frozen control and lagged quadratic term.
      rhs_.head(size_) = -(source + cost);
      rhs_[size_] = 0.0;
      const Vector solved = lu_.solve(rhs_);
      if (lu_.info() != Eigen::Success) throw SolverError("sparse solve failed");
      phi += opts_.damping * (solved.head(size_) - phi);
      lam = solved[size_];
    }
    throw SolverError("HJB iteration did not converge within the outer iteration cap");
  }

 private:
  void compute_gradient(const Vector& phi, Eigen::MatrixXd& grad) const {
    for (std::int64_t idx = 0; idx < size_; ++idx) {
      for (int a = 0; a < p_.d; ++a) {
        const std::int64_t up = grid_.neighbor(idx, a, +1);
        const std::int64_t dn = grid_.neighbor(idx, a, -1);
        if (up >= 0 && dn >= 0) {
          grad(idx, a) = (phi[up] - phi[dn]) / (2.0 * grid_.h);
        } else if (up >= 0) {
          grad(idx, a) = (phi[up] - phi[idx]) / grid_.h;
        } else {
          grad(idx, a) = (phi[idx] - phi[dn]) / grid_.h;
        }
      }
    }
  }

  /// Picks the vertex minimizing the scheme's own upwind form of
  /// b(x, e_i) . grad(Phi) + r /\ l. Evaluating the surrogate with central
  /// gradients instead lets coarse strong-drift nodes alternate between two
  /// vertices forever; the discrete objective makes improvement and solve
  /// agree, so the policy settles.
  void select_controls(const Vector& phi, std::vector<std::uint8_t>& control,
                       Eigen::MatrixXd& bfield, Vector& cost) const {
    const int d = p_.d;
    Vector u(d);
    for (std::int64_t idx = 0; idx < size_; ++idx) {
      const Vector& x = coords_[idx];
      if (mode_.frozen_markov != nullptr) {
        u = (*mode_.frozen_markov)(x);
        control[idx] = 0;
      } else if (mode_.frozen_vertex != nullptr) {
        control[idx] = (*mode_.frozen_vertex)[idx];
        u = simplex_vertex(d, control[idx]);
      } else if (boundary_[idx]) {
        control[idx] = static_cast<std::uint8_t>(u0_index_);
        u = simplex_vertex(d, u0_index_);
      } else {
        const double pos = std::max(x.sum(), 0.0);
        // Upwind one-sided contribution of drift component b along axis a.
        auto upwind_term = [&](int a, double b) {
          const std::int64_t up = grid_.neighbor(idx, a, +1);
          const std::int64_t dn = grid_.neighbor(idx, a, -1);
          return std::max(b, 0.0) * (phi[up] - phi[idx]) / grid_.h +
                 std::max(-b, 0.0) * (phi[dn] - phi[idx]) / grid_.h;
        };
        int best = 0;
        double best_val = std::numeric_limits<double>::infinity();
        for (int i = 0; i < d; ++i) {
          const double base_i = p_.ell_drift[i] - p_.mu[i] * x[i];
          const double val = upwind_term(i, base_i + pos * (p_.mu[i] - p_.gamma[i])) -
                             upwind_term(i, base_i) + std::min(pos * p_.kappa[i], mode_.l);
          if (val < best_val) {
            best_val = val;
            best = i;
          }
        }
        control[idx] = static_cast<std::uint8_t>(best);
        u = simplex_vertex(d, best);
      }
      bfield.row(idx) = drift(x, u, p_).transpose();
      const double pos = std::max(x.sum(), 0.0);
      cost[idx] = std::min(pos * p_.kappa.dot(u), mode_.l);
    }
  }

  void select_maximizer(const Eigen::MatrixXd& grad, VectorField& wfield, Vector& source) const {
    const int d = p_.d;
    Vector g(d), w(d);
    for (std::int64_t idx = 0; idx < size_; ++idx) {
      const double chi = chi_[idx];
      for (int a = 0; a < d; ++a) g[a] = sigma_[a] * grad(idx, a);
      if (mode_.frozen_w != nullptr) {
        w = mode_.frozen_w->at_node(idx);
      } else if (chi <= 0.0) {
        w.setZero();
      } else {
        w = g / chi;
        const double norm = w.norm();
        if (mode_.l != kInf && norm > mode_.l) w *= mode_.l / norm;
      }
      wfield.set_node(idx, w);
      // chi (Sigma w).grad - 0.5 ||chi w||^2, the inner payoff at this w.
      source[idx] = chi * w.dot(g) - 0.5 * chi * chi * w.squaredNorm();
    }
  }

  void assemble_and_factor(const Eigen::MatrixXd& bfield) {
    const int d = p_.d;
    const double h = grid_.h;
    const double h2 = h * h;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(size_) * (2 * d + 2) + 1);

    for (std::int64_t idx = 0; idx < size_; ++idx) {
      double diag = 0.0;
      for (int a = 0; a < d; ++a) {
        const std::int64_t up = grid_.neighbor(idx, a, +1);
        const std::int64_t dn = grid_.neighbor(idx, a, -1);
        const double b = bfield(idx, a);
        const double bp = std::max(b, 0.0);
        const double bm = std::max(-b, 0.0);
        // Outward diffusion and drift legs are suppressed at the faces,
        // keeping the operator a conservative chain generator.
        if (up >= 0) {
          const double c = p_.lambda[a] / h2 + bp / h;
          trip.emplace_back(idx, up, c);
          diag -= c;
        }
        if (dn >= 0) {
          const double c = p_.lambda[a] / h2 + bm / h;
          trip.emplace_back(idx, dn, c);
          diag -= c;
        }
      }
      trip.emplace_back(idx, idx, diag);
      trip.emplace_back(idx, size_, -1.0);
    }
    trip.emplace_back(size_, grid_.origin(), 1.0);

    matrix_.resize(size_ + 1, size_ + 1);
    matrix_.setFromTriplets(trip.begin(), trip.end());
    matrix_.makeCompressed();
    lu_.compute(matrix_);
    if (lu_.info() != Eigen::Success) throw SolverError("sparse factorization failed");
    rhs_.resize(size_ + 1);
  }

  double interior_residual(const Vector& phi, double lam, const Eigen::MatrixXd& bfield,
                           const Vector& source, const Vector& cost,
                           Vector* field = nullptr) const {
    const int d = p_.d;
    const double h = grid_.h;
    const double h2 = h * h;
    if (field != nullptr) field->setZero();
    double worst = 0.0;
    for (std::int64_t idx = 0; idx < size_; ++idx) {
      if (boundary_[idx]) continue;
      double val = source[idx] + cost[idx] - lam;
      for (int a = 0; a < d; ++a) {
        const std::int64_t up = grid_.neighbor(idx, a, +1);
        const std::int64_t dn = grid_.neighbor(idx, a, -1);
        const double b = bfield(idx, a);
        const double bp = std::max(b, 0.0);
        const double bm = std::max(-b, 0.0);
        val += (p_.lambda[a] / h2 + bp / h) * (phi[up] - phi[idx]);
        val += (p_.lambda[a] / h2 + bm / h) * (phi[dn] - phi[idx]);
      }
      if (field != nullptr) (*field)[idx] = std::abs(val);
      worst = std::max(worst, std::abs(val));
    }
    return worst;
  }

  const LimitParams& p_;
  const Grid& grid_;
  const HjbOptions& opts_;
  const Mode& mode_;
  std::int64_t size_;
  Vector sigma_;
  int u0_index_;
  std::vector<Vector> coords_;
  std::vector<double> chi_;
  std::vector<char> boundary_;

  Eigen::SparseMatrix<double> matrix_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  Vector rhs_;
};

CoreResult run_core(const LimitParams& p, const Grid& grid, const HjbOptions& opts,
                    const Mode& mode, const Vector* warm = nullptr) {
  CoreSolver solver(p, grid, opts, mode);
  return solver.run(warm);
}

}  // namespace

// --- Public operations -------------------------------------------------------------------

HjbSolution hjb_solve(const LimitParams& p, const Grid& grid, const HjbOptions& opts,
                      const MarkovControl* frozen_control) {
  Mode mode;
  mode.frozen_markov = frozen_control;
  CoreResult res = run_core(p, grid, opts, mode);
  HjbSolution sol;
  sol.grid = grid;
  sol.value = res.value;
  sol.phi = std::move(res.phi);
  sol.control = std::move(res.control);
  sol.residual_field = std::move(res.residual_field);
  sol.residual = res.residual;
  sol.outer_iterations = res.iterations;
  sol.anchor_shift = grid.coords(grid.origin()).norm();
  return sol;
}

VectorField ground_control(const HjbSolution& sol, const LimitParams& p) {
  const Grid& grid = sol.grid;
  const std::int64_t size = grid.size();
  const Vector sigma = p.sigma_diag();
  VectorField field{grid, p.d, std::vector<double>(static_cast<std::size_t>(size) * p.d, 0.0)};
  Vector w(p.d);
  for (std::int64_t idx = 0; idx < size; ++idx) {
    for (int a = 0; a < p.d; ++a) {
      const std::int64_t up = grid.neighbor(idx, a, +1);
      const std::int64_t dn = grid.neighbor(idx, a, -1);
      double g;
      if (up >= 0 && dn >= 0) {
        g = (sol.phi[up] - sol.phi[dn]) / (2.0 * grid.h);
      } else if (up >= 0) {
        g = (sol.phi[up] - sol.phi[idx]) / grid.h;
      } else {
        g = (sol.phi[idx] - sol.phi[dn]) / grid.h;
      }
      w[a] = sigma[a] * g;
    }
    field.set_node(idx, w);
  }
  return field;
}

namespace {

GameSolution to_game_solution(const Grid& grid, double l, CoreResult&& res) {
  GameSolution sol;
  sol.grid = grid;
  sol.l = l;
  sol.value = res.value;
  sol.phi = std::move(res.phi);
  sol.min_control = std::move(res.control);
  sol.max_control = std::move(res.w);
  sol.residual = res.residual;
  sol.outer_iterations = res.iterations;
  return sol;
}

void check_game_extent(const Grid& grid, double l) {
  if (grid.min_extent() < l) {
    throw ConfigError("grid extent does not cover the truncation ball");
  }
}

}  // namespace

GameSolution game_solve(const LimitParams& p, double l, const Grid& grid, const HjbOptions& opts,
                        const MarkovControl* frozen_control) {
  if (l <= 0.0) throw ConfigError("truncation radius must be positive");
  check_game_extent(grid, l);
  Mode mode;
  mode.l = l;
  mode.frozen_markov = frozen_control;
  return to_game_solution(grid, l, run_core(p, grid, opts, mode));
}

GameSolution game_resolve_frozen_max(const LimitParams& p, double l, const Grid& grid,
                                     const HjbOptions& opts, const VectorField& w) {
  check_game_extent(grid, l);
  Mode mode;
  mode.l = l;
  mode.frozen_w = &w;
  return to_game_solution(grid, l, run_core(p, grid, opts, mode));
}

GameSolution game_resolve_frozen_min(const LimitParams& p, double l, const Grid& grid,
                                     const HjbOptions& opts,
                                     const std::vector<std::uint8_t>& min_control) {
  check_game_extent(grid, l);
  Mode mode;
  mode.l = l;
  mode.frozen_vertex = &min_control;
  return to_game_solution(grid, l, run_core(p, grid, opts, mode));
}

GameSweep game_limit_sweep(const LimitParams& p, const Grid& grid,
                           const std::vector<double>& l_list, const HjbOptions& opts,
                           const MarkovControl* frozen_control) {
  for (std::size_t k = 1; k < l_list.size(); ++k) {
    if (l_list[k] <= l_list[k - 1]) throw ConfigError("truncation radii must increase");
  }
  GameSweep sweep;
  {
    Mode mode;
    mode.frozen_markov = frozen_control;
    sweep.lambda_ref = run_core(p, grid, opts, mode).value;
  }
  Vector warm;
  for (double l : l_list) {
    check_game_extent(grid, l);
    Mode mode;
    mode.l = l;
    mode.frozen_markov = frozen_control;
    CoreResult res = run_core(p, grid, opts, mode, warm.size() > 0 ? &warm : nullptr);
    warm = res.phi;
    sweep.rows.push_back({l, res.value});
  }
  for (std::size_t k = 1; k < sweep.rows.size(); ++k) {
    const double drop = sweep.rows[k - 1].value - sweep.rows[k].value;
    sweep.max_violation = std::max(sweep.max_violation, drop);
  }
  sweep.monotone = sweep.max_violation <= 1e-8;
  return sweep;
}

void write_grid_solution(std::ostream& os, const HjbSolution& sol) {
  os << "value = " << format_g17(sol.value) << "\n";
  os << "residual = " << format_g17(sol.residual) << "\n";
  os << "iterations = " << sol.outer_iterations << "\n";
  os << "index";
  for (int a = 0; a < sol.grid.d; ++a) os << " x" << (a + 1);
  os << " phi control residual\n";
  for (std::int64_t idx = 0; idx < sol.grid.size(); ++idx) {
    os << idx;
    const Vector x = sol.grid.coords(idx);
    for (int a = 0; a < sol.grid.d; ++a) os << " " << format_g17(x[a]);
    os << " " << format_g17(sol.phi[idx]) << " e" << (sol.control[idx] + 1) << " "
       << format_g17(sol.residual_field.size() == sol.grid.size() ? sol.residual_field[idx] : 0.0)
       << "\n";
  }
}

MarkovControl blend_control(const HjbSolution& sol, const LimitParams& p, double l, int k,
                            std::optional<Vector> u0) {
  if (k < 1 || l <= 2.0 / k) throw ConfigError("blend_control: need l > 2/k");
  const int d = p.d;
  const Vector base = u0.has_value() ? *u0 : simplex_vertex(d, d - 1);

  auto selector = std::make_shared<VectorField>();
  selector->grid = sol.grid;
  selector->dim_out = d;
  selector->data.resize(static_cast<std::size_t>(sol.grid.size()) * d);
  for (std::int64_t idx = 0; idx < sol.grid.size(); ++idx) {
    selector->set_node(idx, simplex_vertex(d, sol.control[idx]));
  }

  MarkovControl v;
  v.continuous = true;
  v.frozen_radius = l;
  v.frozen_value = base;
  const double kk = static_cast<double>(k);
  v.map = [selector, base, l, kk](const Vector& x) {
    const double rho = std::clamp(kk * ((l - 1.0 / kk) - x.norm()), 0.0, 1.0);
    if (rho == 0.0) return base;
    return (rho * selector->eval(x) + (1.0 - rho) * base).eval();
  };
  return v;
}

}  // namespace ersc
