#include <cmath>

#include "doctest.h"
#include "rds/cocycle.hpp"
#include "rds/zoo.hpp"
#include "support.hpp"

using namespace rds;

namespace {

NoisePath path_for(const CocycleSystem& sys, uint64_t seed) {
  return NoisePath(seed, sys.grid_step(), 1);
}

CylinderState state1(double s, double x) {
  Eigen::VectorXd v(1);
  v(0) = x;
  return CylinderState(s, v);
}

}  // namespace

TEST_CASE("evolve is the identity at t = 0") {
  auto sys = build_model("forced_contraction");
  auto z = state1(0.25, 0.7);
  auto out = sys.evolve(0.0, path_for(sys, 1), z);
  CHECK(out.s == z.s);
  CHECK(out.x == z.x);
}

TEST_CASE("cocycle law holds on grid-aligned splits") {
  for (const char* name : {"forced_contraction_noisy", "linear_multiplicative", "winding_two"}) {
    auto sys = build_model(name);
    NoisePath omega(77, sys.grid_step(), 1);
    auto z = state1(0.5, 0.3);
    const double u = 0.25, t = 1.5;
    auto direct = sys.evolve(t + u, omega, z);
    auto composed = sys.evolve(t, shift(omega, u), sys.evolve(u, omega, z));
    const int64_t steps = sys.align_steps(t + u);
    const double tol = cocycle_tolerance(2, sys.grid_step(), steps, 1.0);
    CHECK(std::abs(direct.s - composed.s) == 0.0);  // circle motion is exact
    CHECK((direct.x - composed.x).lpNorm<Eigen::Infinity>() <= tol);
  }
}

TEST_CASE("pure rotation: full circle returns the state") {
  auto sys = build_model("pure_rotation");
  auto z = state1(0.25, 1.25);
  auto out = sys.evolve(1.0, path_for(sys, 3), z);
  CHECK(out.s == 0.25);
  CHECK(out.x == z.x);
}

TEST_CASE("circle coordinate is bit-exact against integer arithmetic") {
  auto sys = build_model("pure_rotation");
  NoisePath omega(9, sys.grid_step(), 1);
  auto z = state1(0.25, 0.0);
  // march in uneven grid-aligned chunks so the exactness must survive
  // repeated state round-trips, then compare with the rational oracle
  int64_t steps_total = 0;
  const int64_t chunks[] = {1, 7, 512, 1000, 4096, 123, 994369};
  for (int64_t c : chunks) {
    const double t = static_cast<double>(c) * sys.grid_step();
    z = sys.evolve(t, omega, z);
    omega = omega.shifted_slots(c);
    steps_total += c;
  }
  CHECK(steps_total == 1000108);  // > 1e6 steps
  const double expected = rds::testing::rational_circle_oracle(sys, 0.25, steps_total);
  CHECK(z.s == expected);  // bit-exact
}

TEST_CASE("off-grid circle coordinates are rejected") {
  auto sys = build_model("forced_contraction");
  CHECK_THROWS_AS(sys.evolve(1.0, path_for(sys, 1), state1(0.1234567, 0.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(sys.align_steps(0.00051), std::invalid_argument);
}

TEST_CASE("jacobian product: identity at n = 0, exact powers for linear maps") {
  Eigen::MatrixXd a(2, 2);
  a << 0.9, 0.2, -0.1, 0.8;
  auto sys = make_linear_map_system(a, "linear2");
  NoisePath omega(5, 1.0, 0);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2);
  CylinderState z(0.0, x0);

  auto id = sys.jacobian_product(0, omega, z);
  CHECK(id.mat == Eigen::MatrixXd::Identity(2, 2));
  CHECK(id.log_scale == 0.0);

  auto cube = sys.jacobian_product(3, omega, z);
  CHECK((cube.dense() - a * a * a).lpNorm<Eigen::Infinity>() <= 1e-15);
}

TEST_CASE("jacobian product matches finite differences on a nonlinear model") {
  auto sys = build_model("double_well_forced", {{"sigma", 0.02}});
  NoisePath omega(21, sys.grid_step(), 1);
  auto z = state1(0.0, 0.4);
  const int n = 2;
  const Eigen::MatrixXd analytic = sys.jacobian_product(n, omega, z).dense();
  const Eigen::MatrixXd fd = rds::testing::fd_jacobian(sys, n, omega, z, 1e-3);
  const double rel = (analytic - fd).norm() / fd.norm();
  CHECK(rel <= 1e-4);
}

TEST_CASE("overflow guard switches to log-scaled accumulation") {
  Eigen::MatrixXd a(1, 1);
  a(0, 0) = 1e10;
  auto sys = make_linear_map_system(a, "huge");
  sys.set_escape_radius(std::numeric_limits<double>::infinity());
  NoisePath omega(5, 1.0, 0);
  CylinderState z = state1(0.0, 0.0);
  auto prod = sys.jacobian_product(50, omega, z);
  CHECK(prod.log_scaled);
  CHECK(prod.log_operator_norm() == doctest::Approx(50.0 * std::log(1e10)).epsilon(1e-12));
  CHECK_THROWS_AS(prod.dense(), std::overflow_error);
}

TEST_CASE("phi_n: exact for the scalar contraction map") {
  auto sys = build_model("contraction_map");
  NoisePath omega(1, 1.0, 0);
  for (int n : {1, 4, 17}) {
    auto rec = sys.phi_n(n, omega, state1(0.0, 1.0));
    CHECK(rec.value == doctest::Approx(n * std::log(0.5)).epsilon(1e-13));
  }
}

TEST_CASE("phi_n subadditivity on sampled triples") {
  auto sys = build_model("double_well_forced", {{"sigma", 0.02}});
  int violations = 0;
  for (int trial = 0; trial < 50; ++trial) {
    NoisePath omega(1000 + trial, sys.grid_step(), 1);
    auto z = state1((trial % 256) / 256.0, -0.8 + 0.03 * trial);
    const int n = 1 + trial % 4, m = 1 + (trial / 4) % 3;
    const double whole = sys.phi_n(n + m, omega, z).value;
    const double first = sys.phi_n(m, omega, z).value;
    auto zm = sys.evolve(m, omega, z);
    const double second = sys.phi_n(n, shift(omega, m), zm).value;
    if (whole > first + second + 1e-8) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("phi_n rate of the linear SDE matches the closed form") {
  // Stratonovich/Heun: x(t) = x0 exp(a t + sigma W_t), so phi_n / n -> a.
  const double a = -0.5, sigma = 0.3;
  const int n = 300;
  auto strat = build_model("linear_multiplicative", {{"a", a}, {"sigma", sigma}});
  NoisePath omega(4242, strat.grid_step(), 1);
  auto rec = strat.phi_n(n, omega, state1(0.0, 1.0));
  CHECK(rec.value / n == doctest::Approx(a).epsilon(0.05));

  // Ito/Euler-Maruyama drains an extra sigma^2/2.
  BaseFlow base = BaseFlow::wiener(1, 1.0 / 512);
  auto ito = build_cocycle(linear_multiplicative_spec(a, sigma, 512, true), base, "lin_ito");
  auto rec2 = ito.phi_n(n, omega, state1(0.0, 1.0));
  CHECK(rec2.value / n == doctest::Approx(a - sigma * sigma / 2).epsilon(0.05));
}

TEST_CASE("phi_n_grid agrees with separate phi_n calls") {
  auto sys = build_model("forced_contraction");
  NoisePath omega(8, sys.grid_step(), 1);
  auto z = state1(0.0, 0.9);
  auto grid = sys.phi_n_grid({1, 2, 4}, omega, z);
  REQUIRE(grid.size() == 3);
  for (const auto& rec : grid) {
    CHECK(rec.value == doctest::Approx(sys.phi_n(rec.n, omega, z).value).epsilon(1e-12));
  }
}

TEST_CASE("discrete reduction: semigroup law and contraction factor") {
  auto sys = build_model("forced_contraction");
  auto hhat = discrete_reduction(sys);
  NoisePath omega(15, sys.grid_step(), 1);
  auto z = state1(0.0, 1.3);

  auto twice = hhat.step(hhat.shift_base(omega), hhat.step(omega, z));
  auto direct = hhat.step(omega, z, 2);
  CHECK(twice.s == direct.s);
  CHECK((twice.x - direct.x).lpNorm<Eigen::Infinity>() <=
        cocycle_tolerance(2, sys.grid_step(), 2 * sys.steps_per_unit(), 2.0));

  // s unchanged after whole rotations
  CHECK(hhat.step(omega, z, 5).s == z.s);

  // variation of constants: the return map contracts by e^{-t1}
  const double factor = sys.jacobian_product(1, omega, z).dense()(0, 0);
  CHECK(factor == doctest::Approx(std::exp(-1.0)).epsilon(0.01));
}

TEST_CASE("blow-up is reported for escaping trajectories") {
  auto sys = build_model("expanding_map");
  sys.set_escape_radius(100.0);
  NoisePath omega(2, 1.0, 0);
  CHECK_THROWS_AS(sys.evolve(20, omega, state1(0.0, 1.0)), BlowupError);
}
