#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <cmath>
#include <random>
#include <sstream>

#include "ersc/config.hpp"
#include "ersc/ctmc.hpp"
#include "ersc/experiments.hpp"
#include "ersc/hjb.hpp"
#include "ersc/model.hpp"
#include "ersc/spectral.hpp"
#include "ersc/util.hpp"

using namespace ersc;

namespace {

Vector vec(std::initializer_list<double> vals) {
  Vector v(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (double x : vals) v[i++] = x;
  return v;
}

LimitParams reference() { return ExperimentConfig::reference().params; }

LimitParams one_class(double gamma, double kappa) {
  return LimitParams::create(vec({1.0}), vec({0.0}), vec({1.0}), vec({0.0}), vec({gamma}),
                             vec({kappa}));
}

/// Perron value of Q + diag(r) by shift-inverted power iteration; the
/// birth-death chains this is used on are reversible, so the spectrum is
/// real and the rightmost eigenvalue dominates the resolvent.
double inverse_power_perron(const Eigen::SparseMatrix<double>& q_plus_r_minus_sigma, double sigma,
                            Eigen::Index size) {
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  Eigen::SparseMatrix<double> shifted = q_plus_r_minus_sigma;
  lu.compute(shifted);
  REQUIRE(lu.info() == Eigen::Success);
  Vector v = Vector::Ones(size);
  double eig = 0.0;
  for (int iter = 0; iter < 500; ++iter) {
    Vector w = lu.solve(v);
    const double norm = w.norm();
    w /= norm;
    const double rayleigh = w.dot(lu.solve(w)) / w.dot(w);
    const double candidate = sigma + 1.0 / rayleigh;
    if (iter > 3 && std::abs(candidate - eig) < 1e-13 * std::max(1.0, std::abs(candidate))) {
      return candidate;
    }
    eig = candidate;
    v = w;
  }
  return eig;
}

/// Principal eigenvalue of the reflecting Markov-chain approximation of the
/// one-class diffusion on a uniform grid of spacing h.
double birth_death_oracle(const LimitParams& p, double extent, double h) {
  const int m = static_cast<int>(std::lround(extent / h));
  const int size = 2 * m + 1;
  const double lam = p.lambda[0];
  std::vector<Eigen::Triplet<double>> trip;
  Vector r(size);
  for (int i = 0; i < size; ++i) {
    const double x = -extent + i * h;
    const double b = drift(vec({x}), vec({1.0}), p)[0];
    double diag = 0.0;
    if (i + 1 < size) {
      const double up = lam / (h * h) + std::max(b, 0.0) / h;
      trip.emplace_back(i, i + 1, up);
      diag -= up;
    }
    if (i > 0) {
      const double dn = lam / (h * h) + std::max(-b, 0.0) / h;
      trip.emplace_back(i, i - 1, dn);
      diag -= dn;
    }
    r[i] = std::max(x, 0.0) * p.kappa[0];
    trip.emplace_back(i, i, diag + r[i]);
  }
  const double sigma = r.maxCoeff() + 0.5;
  for (int i = 0; i < size; ++i) trip.emplace_back(i, i, -sigma);
  Eigen::SparseMatrix<double> mat(size, size);
  mat.setFromTriplets(trip.begin(), trip.end());
  return inverse_power_perron(mat, sigma, size);
}

}  // namespace

TEST_CASE("grid mechanics") {
  const Grid g = Grid::cube(2, 2.0, 0.5);
  CHECK(g.size() == 81);
  CHECK(g.coords(g.origin()).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(g.on_boundary(0));
  CHECK_FALSE(g.on_boundary(g.origin()));
  const std::int64_t up = g.neighbor(g.origin(), 0, +1);
  CHECK(g.coords(up)[0] == doctest::Approx(0.5));
  CHECK(g.neighbor(0, 0, -1) == -1);
}

TEST_CASE("vector field interpolation") {
  const Grid g = Grid::cube(2, 2.0, 0.5);
  VectorField f{g, 2, std::vector<double>(static_cast<std::size_t>(g.size()) * 2, 0.0)};
  for (std::int64_t idx = 0; idx < g.size(); ++idx) {
    const Vector x = g.coords(idx);
    f.set_node(idx, vec({x[0] + 2.0 * x[1], 1.0 - x[0]}));
  }
  std::mt19937_64 eng(3);
  std::uniform_real_distribution<double> uni(-1.9, 1.9);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector x = vec({uni(eng), uni(eng)});
    const Vector v = f.eval(x);
    CHECK(v[0] == doctest::Approx(x[0] + 2.0 * x[1]).epsilon(1e-12));  // multilinear is exact on affine
    CHECK(v[1] == doctest::Approx(1.0 - x[0]).epsilon(1e-12));
  }
}

TEST_CASE("zero cost solves to zero value and flat log eigenfunction") {
  LimitParams p = reference();
  p.kappa = Vector::Zero(2);
  const Grid grid = Grid::cube(2, 5.0, 0.25);
  const HjbSolution sol = hjb_solve(p, grid);
  CHECK(std::abs(sol.value) < 1e-8);
  CHECK(sol.phi.lpNorm<Eigen::Infinity>() <= 1e-6);
  CHECK(sol.phi[grid.origin()] == 0.0);
}

TEST_CASE("one-class value matches the Markov-chain oracle") {
  const LimitParams p = one_class(0.5, 0.3);
  const Grid grid = Grid::cube(1, 6.0, 0.005);
  const HjbSolution sol = hjb_solve(p, grid);
  // The multiplicative-form chain eigenvalue carries an O(h) bias of about
  // 0.16 h on this instance; h = 3e-4 puts the oracle well inside the budget.
  const double oracle = birth_death_oracle(p, 6.0, 0.0003);
  CHECK(std::abs(sol.value - oracle) <= 1e-4);
}

TEST_CASE("value is nondecreasing in the cost weights") {
  const LimitParams p = reference();
  LimitParams doubled = p;
  doubled.kappa = 2.0 * p.kappa;
  const Grid grid = Grid::cube(2, 5.0, 0.25);
  const double base = hjb_solve(p, grid).value;
  const double more = hjb_solve(doubled, grid).value;
  CHECK(more >= base - 1e-8);
}

TEST_CASE("vertex minimizer") {
  const LimitParams p = reference();
  SUBCASE("vanishing headcount ties to the first vertex") {
    CHECK(vertex_argmin(vec({-1.0, 0.5}), vec({0.3, -0.8}), p, 1e300) == 0);
  }
  SUBCASE("symmetric data ties to the lowest index") {
    const LimitParams sym = LimitParams::create(vec({0.5, 0.5}), vec({0, 0}), vec({1, 1}),
                                                vec({0, 0}), vec({0.7, 0.7}), vec({0.3, 0.3}));
    CHECK(vertex_argmin(vec({1.0, 1.0}), vec({0.2, 0.2}), sym, 1e300) == 0);
  }
  SUBCASE("vertex search beats a dense simplex sample") {
    const LimitParams q = LimitParams::create(vec({0.3, 0.3, 0.4}), vec({0, 0, 0}),
                                              vec({1, 1, 1}), vec({0, 0, 0}),
                                              vec({0.5, 1.0, 1.5}), vec({0.2, 0.4, 0.1}));
    std::mt19937_64 eng(17);
    std::uniform_real_distribution<double> pos(-3.0, 3.0);
    std::exponential_distribution<double> expo(1.0);
    for (int trial = 0; trial < 3; ++trial) {
      const Vector x = vec({pos(eng), pos(eng), pos(eng)});
      const Vector g = vec({pos(eng), pos(eng), pos(eng)});
      auto objective = [&](const Vector& u) {
        return drift(x, u, q).dot(g) + running_cost(x, u, q);
      };
      const Vector vtx = vertex_minimizer(x, g, q);
      const double vertex_val = objective(vtx);
      double sample_min = 1e300;
      double scale = 0.0;
      for (int s = 0; s < 1000000; ++s) {
        Vector u(3);
        double total = 0.0;
        for (int i = 0; i < 3; ++i) {
          u[i] = expo(eng);
          total += u[i];
        }
        u /= total;  // Dirichlet(1,1,1)
        const double val = objective(u);
        sample_min = std::min(sample_min, val);
        scale = std::max(scale, std::abs(val));
      }
      CHECK(sample_min >= vertex_val - 1e-9 * std::max(1.0, scale));
      CHECK(sample_min - vertex_val <= 5e-3 * std::max(1.0, scale));
    }
  }
}

TEST_CASE("ground control field") {
  const LimitParams p = reference();
  const Grid grid = Grid::cube(2, 3.0, 0.25);

  SUBCASE("constant log eigenfunction gives the zero field") {
    HjbSolution sol;
    sol.grid = grid;
    sol.phi = Vector::Constant(grid.size(), 4.2);
    const VectorField w = ground_control(sol, p);
    CHECK(w.sup_norm() == 0.0);
  }
  SUBCASE("affine log eigenfunction is recovered exactly") {
    const Vector a = vec({0.7, -1.3});
    HjbSolution sol;
    sol.grid = grid;
    sol.phi.resize(grid.size());
    for (std::int64_t idx = 0; idx < grid.size(); ++idx) sol.phi[idx] = a.dot(grid.coords(idx));
    const VectorField w = ground_control(sol, p);
    const Vector sigma = p.sigma_diag();
    for (std::int64_t idx = 0; idx < grid.size(); ++idx) {
      const Vector expect = sigma.cwiseProduct(a);
      CHECK((w.at_node(idx) - expect).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
  }
  SUBCASE("one-sided and central differences agree to first order") {
    for (double h : {0.2, 0.1}) {
      const Grid fine = Grid::cube(1, 3.0, h);
      double worst = 0.0;
      for (std::int64_t idx = 1; idx + 1 < fine.size(); ++idx) {
        const double x = fine.coords(idx)[0];
        const double central = (std::sin(x + h) - std::sin(x - h)) / (2.0 * h);
        const double onesided = (std::sin(x + h) - std::sin(x)) / h;
        worst = std::max(worst, std::abs(central - onesided));
      }
      CHECK(worst <= 0.75 * h);  // |f''|/2 * h with slack
    }
  }
}

TEST_CASE("radial cutoff shape") {
  CHECK(radial_cutoff(vec({0.5, 0.0}), 4.0) == 1.0);
  CHECK(radial_cutoff(vec({2.0, 0.0}), 4.0) == 1.0);
  CHECK(radial_cutoff(vec({4.0, 0.0}), 4.0) == 0.0);
  CHECK(radial_cutoff(vec({5.0, 0.0}), 4.0) == 0.0);
  const double mid = radial_cutoff(vec({3.0, 0.0}), 4.0);
  CHECK(mid == doctest::Approx(0.5).epsilon(1e-12));
  // C^1: small increments move the cutoff by O(increment)
  double prev = radial_cutoff(vec({2.0, 0.0}), 4.0);
  for (double r = 2.01; r <= 4.0; r += 0.01) {
    const double cur = radial_cutoff(vec({r, 0.0}), 4.0);
    CHECK(std::abs(cur - prev) <= 0.02);
    prev = cur;
  }
}

TEST_CASE("game solution structure") {
  const LimitParams p = reference();
  const Grid grid = Grid::cube(2, 4.0, 0.25);
  const double l = 3.0;
  const GameSolution game = game_solve(p, l, grid);
  CHECK(game.residual <= 1e-6);

  SUBCASE("maximizer respects the ball and vanishes outside the cutoff") {
    for (std::int64_t idx = 0; idx < grid.size(); ++idx) {
      const Vector w = game.max_control.at_node(idx);
      CHECK(w.norm() <= l + 1e-12);
      if (grid.coords(idx).norm() >= l) CHECK(w.norm() == 0.0);
    }
  }
  SUBCASE("zero-gradient nodes store the zero maximizer") {
    LimitParams zero = p;
    zero.kappa = Vector::Zero(2);
    const GameSolution flat = game_solve(zero, l, grid);
    CHECK(flat.max_control.sup_norm() <= 1e-5);
  }
  SUBCASE("both orders reproduce the joint value") {
    const GameSolution fmax = game_resolve_frozen_max(p, l, grid, {}, game.max_control);
    const GameSolution fmin = game_resolve_frozen_min(p, l, grid, {}, game.min_control);
    CHECK(std::abs(fmax.value - game.value) <= 1e-8);
    CHECK(std::abs(fmin.value - game.value) <= 1e-8);
  }
}

TEST_CASE("truncation values increase toward the untruncated value") {
  const LimitParams p = reference();
  const Grid grid = Grid::cube(2, 6.0, 0.25);
  const GameSweep sweep = game_limit_sweep(p, grid, {1.0, 2.0, 4.0}, {});
  CHECK(sweep.monotone);
  CHECK(sweep.max_violation <= 1e-8);
  CHECK(sweep.rows.back().value <= sweep.lambda_ref + 1e-7);
  CHECK_THROWS_AS(game_limit_sweep(p, grid, {2.0, 1.0}, {}), ConfigError);
  CHECK_THROWS_AS(game_solve(p, 8.0, grid, {}), ConfigError);  // ball not covered
}

TEST_CASE("grid refinement changes the value at first order") {
  const LimitParams p = one_class(0.5, 0.3);
  const double l0 = hjb_solve(p, Grid::cube(1, 6.0, 0.08)).value;
  const double l1 = hjb_solve(p, Grid::cube(1, 6.0, 0.04)).value;
  const double l2 = hjb_solve(p, Grid::cube(1, 6.0, 0.02)).value;
  const double ratio = std::abs(l0 - l1) / std::abs(l1 - l2);
  CHECK(ratio >= 1.3);
  CHECK(ratio <= 3.0);
}

TEST_CASE("blended near-optimal control") {
  const LimitParams p = reference();
  const Grid grid = Grid::cube(2, 5.0, 0.25);
  const HjbSolution sol = hjb_solve(p, grid);
  const double l = 3.0;
  const int k = 8;
  const MarkovControl v = blend_control(sol, p, l, k);
  CHECK(v.continuous);

  SUBCASE("inside the inner ball the control is the raw selector at nodes") {
    for (std::int64_t idx = 0; idx < grid.size(); ++idx) {
      const Vector x = grid.coords(idx);
      if (x.norm() >= l - 2.0 / k) continue;
      const Vector expect = simplex_vertex(2, sol.control[idx]);
      CHECK((v(x) - expect).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
  }
  SUBCASE("outside the freeze ball the control is exactly u0") {
    std::mt19937_64 eng(2);
    std::uniform_real_distribution<double> uni(-6.0, 6.0);
    int outside = 0;
    while (outside < 100) {
      const Vector x = vec({uni(eng), uni(eng)});
      if (x.norm() <= l) continue;
      ++outside;
      CHECK((v(x) - simplex_vertex(2, 1)).lpNorm<Eigen::Infinity>() == 0.0);
    }
  }
  SUBCASE("grid-level modulus of continuity") {
    // Jump across a step of size delta is at most the cutoff Lipschitz bound
    // times the simplex diameter plus the interpolation modulus.
    const double delta = grid.h / 10.0;
    const double bound = delta * (k * std::sqrt(2.0) + 2.0 * std::sqrt(2.0) / grid.h) + 1e-12;
    std::mt19937_64 eng(4);
    std::uniform_real_distribution<double> uni(-4.0, 4.0);
    for (int trial = 0; trial < 2000; ++trial) {
      Vector x = vec({uni(eng), uni(eng)});
      Vector y = x;
      y[trial % 2] += delta;
      CHECK((v(x) - v(y)).norm() <= bound);
    }
  }
  SUBCASE("values are simplex points everywhere") {
    std::mt19937_64 eng(6);
    std::uniform_real_distribution<double> uni(-5.0, 5.0);
    for (int trial = 0; trial < 500; ++trial) {
      const Vector u = v(vec({uni(eng), uni(eng)}));
      CHECK(is_simplex_point(u, 1e-9));
    }
  }
}

TEST_CASE("solver reports respect the residual contract") {
  const LimitParams p = reference();
  const Grid grid = Grid::cube(2, 5.0, 0.25);
  HjbOptions opts;
  opts.residual_tol = 1e-7;
  const HjbSolution sol = hjb_solve(p, grid, opts);
  CHECK(sol.residual <= 1e-7);
  CHECK(sol.outer_iterations > 0);
  CHECK(sol.anchor_shift == 0.0);

  HjbOptions strict;
  strict.max_outer = 2;
  CHECK_THROWS_AS(hjb_solve(p, grid, strict), SolverError);
}

TEST_CASE("grid solution exports one line per node") {
  const LimitParams p = reference();
  const Grid grid = Grid::cube(2, 3.0, 0.5);
  const HjbSolution sol = hjb_solve(p, grid);
  REQUIRE(sol.residual_field.size() == grid.size());
  CHECK(sol.residual_field.maxCoeff() == sol.residual);
  std::ostringstream os;
  write_grid_solution(os, sol);
  std::istringstream in(os.str());
  std::string line;
  std::size_t lines = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lines;
    if (line == "index x1 x2 phi control residual") header = true;
  }
  CHECK(header);
  CHECK(lines == 4 + static_cast<std::size_t>(grid.size()));
}

TEST_CASE("frozen Markov control value dominates the optimized value") {
  const LimitParams p = reference();
  const Grid grid = Grid::cube(2, 5.0, 0.25);
  // Same boundary control for both solves: the optimizer pins the last
  // vertex at the boundary, so compare against that control held everywhere.
  const double optimal = hjb_solve(p, grid).value;
  const MarkovControl v = MarkovControl::constant(simplex_vertex(2, 1), 100.0);
  const double frozen = hjb_solve(p, grid, {}, &v).value;
  CHECK(frozen >= optimal - 1e-8);
}
