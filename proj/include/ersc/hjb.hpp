#ifndef ERSC_HJB_HPP
#define ERSC_HJB_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "ersc/model.hpp"

namespace ersc {

/// Uniform symmetric grid on [-L_1, L_1] x ... x [-L_d, L_d] with spacing h.
/// Extents are snapped to whole multiples of h so the origin is a node.
struct Grid {
  int d = 0;
  double h = 0.0;
  std::vector<double> extent;  // per-axis L
  std::vector<int> npts;       // per-axis node count, odd

  static Grid symmetric(std::vector<double> extent, double h);
  static Grid cube(int d, double extent, double h);

  std::int64_t size() const;
  std::int64_t index_of(const std::vector<int>& multi) const;
  std::vector<int> multi_of(std::int64_t idx) const;
  Vector coords(std::int64_t idx) const;
  std::int64_t origin() const;
  bool on_boundary(std::int64_t idx) const;
  /// Neighbor index along axis, or -1 if it would leave the grid.
  std::int64_t neighbor(std::int64_t idx, int axis, int step) const;
  double min_extent() const;
};

/// Grid-sampled R^m field with clamped multilinear interpolation.
struct VectorField {
  Grid grid;
  int dim_out = 0;
  std::vector<double> data;  // size * dim_out, node-major

  Vector at_node(std::int64_t idx) const;
  void set_node(std::int64_t idx, const Vector& v);
  Vector eval(const Vector& x) const;
  double sup_norm() const;
};

/// Converged log-form solution of the ergodic risk-sensitive HJB equation
///   min_u [ b(x,u).grad(Phi) + sum_i lambda_i dxx_i(Phi)
///           + 0.5 ||Sigma^T grad(Phi)||^2 + r(x,u) ] = Lambda,
/// anchored by Phi(0) = 0.
struct HjbSolution {
  Grid grid;
  double value = 0.0;            // Lambda
  Vector phi;                    // log eigenfunction
  std::vector<std::uint8_t> control;  // selected simplex vertex per node
  Vector residual_field;         // absolute equation residual per node, 0 on the boundary
  double residual = 0.0;         // interior sup-norm of the log-form equation
  int outer_iterations = 0;
  double anchor_shift = 0.0;     // distance from the anchor node to the origin
};

/// Truncated-game solution: value rho_l, log field, both control fields.
/// The maximizer satisfies ||w|| <= l and vanishes where the radial cutoff
/// does.
struct GameSolution {
  Grid grid;
  double l = 0.0;
  double value = 0.0;
  Vector phi;
  std::vector<std::uint8_t> min_control;
  VectorField max_control;
  double residual = 0.0;
  int outer_iterations = 0;
};

struct HjbOptions {
  double residual_tol = 1e-6;    // interior sup-norm
  double value_tol = 1e-8;       // Lambda drift per outer iteration
  int value_window = 5;          // consecutive quiet iterations required
  int max_outer = 5000;
  double damping = 0.7;          // update relaxation on Phi
  int frozen_vertex = -1;        // boundary control u0; -1 means the last vertex
};

/// Argmin over the simplex vertices of b(x, e_i) . grad + min(r(x, e_i), cap);
/// affine-plus-concave structure makes the vertex search exact. Ties go to
/// the lowest index.
int vertex_argmin(const Vector& x, const Vector& grad_phi, const LimitParams& p,
                  double cost_cap);
Vector vertex_minimizer(const Vector& x, const Vector& grad_phi, const LimitParams& p,
                        double cost_cap = 1e300);

/// Radial C^1 cutoff: 1 on the ball of radius l/2, 0 outside radius l.
double radial_cutoff(const Vector& x, double l);

HjbSolution hjb_solve(const LimitParams& p, const Grid& grid, const HjbOptions& opts = {},
                      const MarkovControl* frozen_control = nullptr);

/// Sigma^T grad(Phi) by central differences (one-sided on the boundary).
VectorField ground_control(const HjbSolution& sol, const LimitParams& p);

GameSolution game_solve(const LimitParams& p, double l, const Grid& grid,
                        const HjbOptions& opts = {}, const MarkovControl* frozen_control = nullptr);

/// Re-solves with the maximizer frozen, optimizing the minimizer only.
GameSolution game_resolve_frozen_max(const LimitParams& p, double l, const Grid& grid,
                                     const HjbOptions& opts, const VectorField& w);

/// Re-solves with the minimizer frozen, optimizing the maximizer only.
GameSolution game_resolve_frozen_min(const LimitParams& p, double l, const Grid& grid,
                                     const HjbOptions& opts,
                                     const std::vector<std::uint8_t>& min_control);

struct GameSweepRow {
  double l = 0.0;
  double value = 0.0;
};

struct GameSweep {
  std::vector<GameSweepRow> rows;
  double lambda_ref = 0.0;  // HJB value under the same mode
  bool monotone = true;     // non-decreasing within 1e-8 slack
  double max_violation = 0.0;
};

GameSweep game_limit_sweep(const LimitParams& p, const Grid& grid,
                           const std::vector<double>& l_list, const HjbOptions& opts = {},
                           const MarkovControl* frozen_control = nullptr);

/// Continuous near-optimal Markov control: multilinearly interpolated vertex
/// selector blended into u0 through the explicit cutoff that is 1 on
/// B_{l - 2/k} and 0 outside B_{l - 1/k}; equals u0 exactly outside B_l.
MarkovControl blend_control(const HjbSolution& sol, const LimitParams& p, double l, int k,
                            std::optional<Vector> u0 = std::nullopt);

/// Flat text layout of the solved grid fields: one line per node with
/// index, coordinates, log eigenfunction, control vertex, and residual.
void write_grid_solution(std::ostream& os, const HjbSolution& sol);

}  // namespace ersc

#endif  // ERSC_HJB_HPP
