#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ersc/config.hpp"
#include "ersc/model.hpp"
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

}  // namespace

TEST_CASE("parameter invariants") {
  const LimitParams p = reference();
  CHECK(std::abs(p.rho.sum() - 1.0) <= 1e-12);
  CHECK(std::abs(p.rho_hat + p.ell.sum()) <= 1e-12);

  // hats present, mu = 1: second-order identities still exact
  const LimitParams q = LimitParams::create(vec({0.5, 0.5}), vec({0.3, -0.1}), vec({1.0, 1.0}),
                                            vec({0.2, 0.4}), vec({0.5, 1.0}), vec({0.2, 0.4}));
  CHECK(q.ell[0] == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(q.ell[1] == doctest::Approx(-0.3).epsilon(1e-14));
  CHECK(std::abs(q.rho_hat + q.ell.sum()) <= 1e-12);
  CHECK((q.ell - q.ell_drift).lpNorm<Eigen::Infinity>() == 0.0);  // mu = 1 here

  // with mu != 1 the two differ componentwise by the factor mu_i, and the
  // dynamics constant is the one the finite-n embedding reproduces exactly
  const LimitParams w = LimitParams::create(vec({0.8, 0.6}), vec({0.4, -0.2}), vec({2.0, 1.0}),
                                            vec({0.3, 0.1}), vec({0.8, 1.2}), vec({0.25, 0.35}));
  CHECK(w.ell_drift[0] == doctest::Approx(0.4 - 0.4 * 0.3).epsilon(1e-14));
  CHECK(w.ell[0] == doctest::Approx(w.ell_drift[0] / 2.0).epsilon(1e-14));
  CHECK(std::abs(w.rho_hat + w.ell.sum()) <= 1e-12);
  const SystemN sysw = SystemN::embed(w, 49);
  for (int i = 0; i < 2; ++i) CHECK(sysw.ell_n[i] == doctest::Approx(w.ell_drift[i]).epsilon(1e-13));

  CHECK_THROWS_AS(LimitParams::create(vec({0.5, 0.6}), vec({0, 0}), vec({1, 1}), vec({0, 0}),
                                      vec({1, 1}), vec({0, 0})),
                  ConfigError);  // loads do not sum to 1
  CHECK_THROWS_AS(LimitParams::create(vec({1.0, -0.2}), vec({0, 0}), vec({1, 1}), vec({0, 0}),
                                      vec({1, 1}), vec({0, 0})),
                  ConfigError);
  CHECK_THROWS_AS(LimitParams::create(vec({0.5, 0.5}), vec({0.0}), vec({1, 1}), vec({0, 0}),
                                      vec({1, 1}), vec({0, 0})),
                  ConfigError);  // dimension mismatch
}

TEST_CASE("canonical embedding") {
  const LimitParams p = reference();
  const SystemN sys = SystemN::embed(p, 16);
  CHECK(sys.lambda_n[0] == 8.0);
  CHECK(sys.mu_n[0] == 1.0);
  CHECK(sys.gamma_n[1] == 1.0);
  for (int i = 0; i < p.d; ++i) CHECK(sys.ell_n[i] == p.ell[i]);  // exact, mu = 1 here

  const LimitParams q = LimitParams::create(vec({0.5, 0.5}), vec({0.3, -0.1}), vec({1.0, 1.0}),
                                            vec({0.2, 0.4}), vec({0.5, 1.0}), vec({0.2, 0.4}));
  const SystemN sysq = SystemN::embed(q, 25);
  for (int i = 0; i < q.d; ++i) CHECK(sysq.ell_n[i] == doctest::Approx(q.ell[i]).epsilon(1e-14));

  // embedded rate turning nonpositive is rejected
  const LimitParams bad = LimitParams::create(vec({0.5, 0.5}), vec({-10.0, 0.0}), vec({1, 1}),
                                              vec({0, 0}), vec({1, 1}), vec({0, 0}));
  CHECK_THROWS_AS(SystemN::embed(bad, 4), ConfigError);
}

TEST_CASE("drift formula") {
  const LimitParams p = reference();
  SUBCASE("zero state gives the drift constant") {
    const Vector b = drift(Vector::Zero(2), vec({0.3, 0.7}), p);
    CHECK((b - p.ell_drift).lpNorm<Eigen::Infinity>() == 0.0);
  }
  SUBCASE("one class by hand") {
    const LimitParams q = one_class(2.0, 0.0);
    const Vector b = drift(vec({3.0}), vec({1.0}), q);
    CHECK(b[0] == doctest::Approx(-6.0).epsilon(1e-14));
  }
  SUBCASE("negative headcount drops the positive part") {
    const Vector x = vec({1.0, -2.0});
    const Vector b = drift(x, vec({0.5, 0.5}), p);
    const Vector expect = p.ell_drift - p.mu.cwiseProduct(x);
    CHECK((b - expect).lpNorm<Eigen::Infinity>() <= 1e-15);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(drift(vec({1.0}), vec({0.5, 0.5}), p), ConfigError);
  }
}

TEST_CASE("running cost") {
  LimitParams p = reference();
  p.kappa = vec({1.0, 2.0});
  CHECK(running_cost(vec({-1.0, 0.5}), vec({0.5, 0.5}), p) == 0.0);
  CHECK(running_cost(vec({2.0, 1.0}), vec({0.5, 0.5}), p) == doctest::Approx(4.5).epsilon(1e-14));
  CHECK(running_cost(vec({2.0, 1.0}), vec({0.0, 1.0}), p) ==
        doctest::Approx(2.0 * 3.0).epsilon(1e-14));
}

TEST_CASE("drift and cost are affine in the control") {
  const LimitParams p = reference();
  std::mt19937_64 eng(7);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::uniform_real_distribution<double> xs(-5.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector x = vec({xs(eng), xs(eng)});
    Vector u1 = vec({uni(eng), 0.0});
    u1[1] = 1.0 - u1[0];
    Vector u2 = vec({uni(eng), 0.0});
    u2[1] = 1.0 - u2[0];
    const double a = uni(eng);
    const Vector mix = a * u1 + (1.0 - a) * u2;
    const Vector lhs = drift(x, mix, p);
    const Vector rhs = a * drift(x, u1, p) + (1.0 - a) * drift(x, u2, p);
    CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() <= 1e-12);
    const double cl = running_cost(x, mix, p);
    const double cr = a * running_cost(x, u1, p) + (1.0 - a) * running_cost(x, u2, p);
    CHECK(std::abs(cl - cr) <= 1e-12);
    CHECK(cl >= 0.0);
  }
}

TEST_CASE("action feasibility") {
  CHECK(action_feasible({5, 0}, {3, 0}, 3));
  CHECK_FALSE(action_feasible({5, 0}, {2, 1}, 3));
  CHECK(action_feasible({1, 1}, {1, 1}, 5));
  CHECK_FALSE(action_feasible({1, 1}, {1, 0}, 5));
  CHECK(action_feasible({0, 0}, {0, 0}, 3));
}

TEST_CASE("control from allocation") {
  SUBCASE("nonpositive scaled headcount yields the last vertex") {
    const Vector u = control_from_allocation(vec({-1.0, 0.5}), vec({-1.0, 0.5}));
    CHECK(u[0] == 0.0);
    CHECK(u[1] == 1.0);
  }
  SUBCASE("raw division, not work conserving") {
    const Vector u = control_from_allocation(vec({2.0, 2.0}), vec({1.0, 1.0}));
    CHECK(u[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(u[1] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK_FALSE(is_simplex_point(u));
  }
  SUBCASE("work-conserving pairs land on the simplex") {
    const LimitParams p = reference();
    const SystemN sys = SystemN::embed(p, 16);
    LatticeState x{12, 9};  // e.x = 21 > 16
    LatticeState z(2);
    priority_fill(x, sys.n, z);
    const Vector u = control_from_allocation(scale_state(x, sys, p), scale_state(z, sys, p));
    CHECK(is_simplex_point(u, 1e-12));
  }
}

TEST_CASE("lattice rounding") {
  CHECK(round_to_lattice(vec({2.0, 3.0})) == LatticeState{2, 3});
  CHECK(round_to_lattice(vec({1.5, 2.5})) == LatticeState{1, 3});
  CHECK(round_to_lattice(vec({0.25, 0.25, 0.5})) == LatticeState{0, 0, 1});
  CHECK(round_to_lattice(vec({1.0 - 5e-10, 1.0})) == LatticeState{0, 2});  // snapped
  CHECK_THROWS_AS(round_to_lattice(vec({1.0, 0.5})), ConfigError);
  CHECK_THROWS_AS(round_to_lattice(vec({-0.5, 1.5})), ConfigError);

  std::mt19937_64 eng(11);
  std::uniform_real_distribution<double> uni(0.0, 12.0);
  std::uniform_int_distribution<int> dims(1, 4);
  for (int trial = 0; trial < 100000; ++trial) {
    const int d = dims(eng);
    Vector z(d);
    double partial = 0.0;
    for (int i = 0; i + 1 < d; ++i) {
      z[i] = uni(eng);
      partial += z[i];
    }
    const double total = std::ceil(partial) + (trial % 5);
    z[d - 1] = total - partial;
    const LatticeState out = round_to_lattice(z);
    long sum = 0;
    double max_move = 0.0;
    for (int i = 0; i < d; ++i) {
      CHECK(out[i] >= 0);
      sum += out[i];
      max_move = std::max(max_move, std::abs(out[i] - z[i]));
    }
    CHECK(sum == static_cast<long>(total));  // exact sum preservation
    CHECK(max_move <= 2.0 * d);
  }
}

TEST_CASE("policy from a Markov control") {
  const LimitParams p = reference();

  SUBCASE("empty queue returns the full state") {
    const SystemN sys = SystemN::embed(p, 16);
    const MarkovControl v = MarkovControl::constant(simplex_vertex(2, 1), 2.0);
    const SchedulingPolicy policy = policy_from_control(v, sys, p);
    const LatticeState x{5, 6};  // e.x = 11 <= 16, inside the freeze box
    CHECK(policy(x) == x);
  }
  SUBCASE("last-vertex control queues the excess in the last class") {
    const SystemN sys = SystemN::embed(p, 16);
    const MarkovControl v = MarkovControl::constant(simplex_vertex(2, 1), 2.0);
    const SchedulingPolicy policy = policy_from_control(v, sys, p);
    const LatticeState x{9, 10};  // e.x = 19, excess 3, inside freeze box
    const LatticeState z = policy(x);
    CHECK(z == LatticeState{9, 7});
    CHECK(action_feasible(x, z, sys.n));
  }
  SUBCASE("outside the freeze box the fill is static priority") {
    const LimitParams q = LimitParams::create(vec({0.5, 0.5}), vec({0, 0}), vec({1, 1}),
                                              vec({0, 0}), vec({0.5, 1.0}), vec({0, 0}));
    const SystemN sys = SystemN::embed(q, 3);
    const MarkovControl v = MarkovControl::constant(simplex_vertex(2, 1), 1.0);
    const SchedulingPolicy policy = policy_from_control(v, sys, q);
    const LatticeState x{2, 4};  // max_i |x_i - 1.5| = 2.5 > sqrt(3)
    CHECK(policy(x) == LatticeState{2, 1});
  }
  SUBCASE("feasibility is checked eagerly") {
    const SystemN sys = SystemN::embed(p, 16);
    // Freeze radius too large: some box state has too small a last class.
    const MarkovControl v = MarkovControl::constant(simplex_vertex(2, 1), 3.9);
    CHECK_THROWS_AS(policy_from_control(v, sys, p), SolverError);
  }
  SUBCASE("feasible everywhere on a small box, exhaustively") {
    const SystemN sys = SystemN::embed(p, 9);
    const MarkovControl v = MarkovControl::constant(vec({0.5, 0.5}), 1.4);
    const SchedulingPolicy policy = policy_from_control(v, sys, p);
    LatticeState x(2);
    for (x[0] = 0; x[0] <= 20; ++x[0]) {
      for (x[1] = 0; x[1] <= 20; ++x[1]) {
        REQUIRE(action_feasible(x, policy(x), sys.n));
      }
    }
  }
}

TEST_CASE("state scaling") {
  const LimitParams p = reference();
  const SystemN sys = SystemN::embed(p, 100);
  const Vector xhat = scale_state({60, 40}, sys, p);
  CHECK(xhat[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(xhat[1] == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(scale_state({50, 50}, sys, p).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(unscale_state(xhat, sys, p) == LatticeState{60, 40});

  std::mt19937_64 eng(3);
  std::uniform_int_distribution<int> xs(0, 200);
  for (int trial = 0; trial < 1000; ++trial) {
    const LatticeState x{xs(eng), xs(eng)};
    CHECK(unscale_state(scale_state(x, sys, p), sys, p) == x);
  }
}

TEST_CASE("Markov control freeze is exact") {
  MarkovControl v;
  v.frozen_value = simplex_vertex(2, 1);
  v.frozen_radius = 2.0;
  v.continuous = true;
  v.map = [](const Vector&) { return Vector::Constant(2, 0.5); };
  const Vector far = vec({3.0, 3.0});
  CHECK((v(far) - v.frozen_value).lpNorm<Eigen::Infinity>() == 0.0);
  const Vector near_x = vec({0.5, 0.5});
  CHECK(v(near_x)[0] == 0.5);
}

TEST_CASE("parameters load from key-value text at full precision") {
  const std::string text =
      "# instance\n"
      "lambda = 0.5 0.5\n"
      "mu = 1 1\n"
      "gamma = 0.33333333333333331 1\n"
      "kappa = 0.1 0.2\n";
  const ExperimentConfig cfg = ExperimentConfig::from_keyvalues(KeyValues::parse_string(text));
  CHECK(cfg.params.gamma[0] == 0.33333333333333331);
  const ExperimentConfig back =
      ExperimentConfig::from_keyvalues(KeyValues::parse_string(cfg.serialize()));
  CHECK(back.params.gamma[0] == cfg.params.gamma[0]);
  CHECK(back.serialize() == cfg.serialize());
}
