#include <cmath>

#include "doctest.h"
#include "rds/zoo.hpp"
#include "support.hpp"

using namespace rds;

namespace {

CylinderState state1(double s, double x) {
  Eigen::VectorXd v(1);
  v(0) = x;
  return CylinderState(s, v);
}

}  // namespace

TEST_CASE("the closed-form curve satisfies the forced-contraction ODE") {
  // substitution check: d/ds x*(s) = -x*(s) + cos(2 pi s)
  for (double s : {0.0, 0.13, 0.25, 0.49, 0.7, 0.99}) {
    const double d = 1e-6;
    const double lhs = (forced_contraction_curve(s + d) - forced_contraction_curve(s - d)) / (2 * d);
    const double rhs = -forced_contraction_curve(s) + std::cos(2 * M_PI * s);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
  }
}

TEST_CASE("degenerate SDE: zero drift and diffusion is pure rotation") {
  auto sys = build_model("pure_rotation");
  NoisePath omega(3, sys.grid_step(), 0);
  auto z = state1(0.125, 2.5);
  auto out = sys.evolve(0.5, omega, z);
  CHECK(out.s == 0.625);
  CHECK(out.x(0) == 2.5);
  CHECK(sys.jacobian_product(1, omega, z).dense()(0, 0) == 1.0);
}

TEST_CASE("scalar exponential decay matches the integrator order") {
  SdeSpec spec;
  spec.dim = 1;
  spec.noise_dim = 0;
  spec.interpretation = SdeSpec::Interpretation::ito;
  spec.integrator = SdeSpec::Integrator::euler_maruyama;
  spec.steps_per_unit = 512;
  spec.drift = [](double, const Eigen::VectorXd& x, Eigen::VectorXd& out) { out(0) = -x(0); };
  spec.drift_jacobian = [](double, const Eigen::VectorXd&, Eigen::MatrixXd& out) {
    out(0, 0) = -1.0;
  };
  auto sys = build_cocycle(spec, BaseFlow::wiener(0, 1.0 / 512), "decay");
  NoisePath omega(1, sys.grid_step(), 0);
  const double x0 = 0.8;
  auto out = sys.evolve(2.0, omega, state1(0.0, x0));
  CHECK(out.x(0) == doctest::Approx(x0 * std::exp(-2.0)).epsilon(0.01));
}

TEST_CASE("long-run orbit settles on the analytic invariant curve") {
  auto sys = build_model("forced_contraction");
  NoisePath omega(7, sys.grid_step(), 0);
  auto out = sys.evolve(20.0, omega, state1(0.0, 0.9));
  CHECK(out.s == 0.0);
  CHECK(std::abs(out.x(0) - forced_contraction_curve(0.0)) <= 1e-3);
}

TEST_CASE("model zoo carries the required entries and facts") {
  const auto& zoo = model_zoo();
  CHECK(zoo.size() >= 4);

  const auto& a = zoo_entry("forced_contraction");
  CHECK(a.facts.fibre_count == 1);
  CHECK(a.facts.windings == std::vector<int>{1});
  CHECK(a.facts.provenance.count("curve") == 1);

  const auto& b = zoo_entry("linear_multiplicative");
  CHECK(b.facts.top_exponent == doctest::Approx(b.defaults.at("a")));

  const auto& c = zoo_entry("double_well_forced");
  CHECK(c.facts.fibre_count == 2);

  const auto& d = zoo_entry("winding_two");
  CHECK(d.facts.fibre_count == 2);
  CHECK(d.facts.windings == std::vector<int>{2});
  // the construction: one closed curve meeting each fibre in +-sin(pi s)
  CHECK(d.facts.curve(0.3) == doctest::Approx(std::sin(M_PI * 0.3)));
  CHECK(d.facts.curve(1.3) == doctest::Approx(-std::sin(M_PI * 0.3)));

  CHECK_THROWS_AS(zoo_entry("no_such_model"), std::invalid_argument);
}

TEST_CASE("integrate_step: identity for the trivial SDE, exact Euler derivative") {
  SdeSpec spec;
  spec.dim = 1;
  spec.noise_dim = 0;
  spec.interpretation = SdeSpec::Interpretation::ito;
  spec.integrator = SdeSpec::Integrator::euler_maruyama;
  spec.steps_per_unit = 100;  // h = 0.01
  spec.drift = [](double, const Eigen::VectorXd& x, Eigen::VectorXd& out) { out(0) = -x(0); };
  spec.drift_jacobian = [](double, const Eigen::VectorXd&, Eigen::MatrixXd& out) {
    out(0, 0) = -1.0;
  };
  NoisePath omega(1, spec.step_h(), 0);
  Eigen::VectorXd x(1);
  x(0) = 0.5;
  Eigen::MatrixXd jac(1, 1);
  integrate_step(spec, omega, 0, 0.0, x, &jac);
  CHECK(jac(0, 0) == 1.0 - 0.01);  // exact scheme derivative
  CHECK(x(0) == 0.5 + 0.01 * (-0.5));

  SdeSpec trivial = spec;
  trivial.drift = [](double, const Eigen::VectorXd&, Eigen::VectorXd& out) { out(0) = 0.0; };
  trivial.drift_jacobian = [](double, const Eigen::VectorXd&, Eigen::MatrixXd& out) {
    out(0, 0) = 0.0;
  };
  Eigen::VectorXd y(1);
  y(0) = 1.5;
  integrate_step(trivial, omega, 0, 0.0, y, &jac);
  CHECK(y(0) == 1.5);
  CHECK(jac(0, 0) == 1.0);
}

TEST_CASE("scheme Jacobian differentiates the scheme, not the flow") {
  // finite differences of one integrator step agree to ~machine precision
  auto spec = linear_multiplicative_spec(-0.4, 0.25, 512, false);
  NoisePath omega(33, spec.step_h(), 1);
  for (double x0 : {0.3, -1.2}) {
    Eigen::VectorXd x(1);
    Eigen::MatrixXd jac(1, 1);
    x(0) = x0;
    integrate_step(spec, omega, 5, 0.25, x, &jac);

    const double d = 1e-6;
    Eigen::VectorXd xp(1), xm(1);
    xp(0) = x0 + d;
    xm(0) = x0 - d;
    integrate_step(spec, omega, 5, 0.25, xp, nullptr);
    integrate_step(spec, omega, 5, 0.25, xm, nullptr);
    const double fd = (xp(0) - xm(0)) / (2 * d);
    CHECK(jac(0, 0) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("Euler-Maruyama strong order: halving the step shrinks error by ~sqrt(2)") {
  const double a = -0.5, sigma = 0.3, T = 1.0;
  auto run_error = [&](int spu, uint64_t seed_base) {
    auto spec = linear_multiplicative_spec(a, sigma, spu, true);
    auto sys = build_cocycle(spec, BaseFlow::wiener(1, spec.step_h()), "em");
    double total = 0.0;
    const int paths = 100;
    for (int i = 0; i < paths; ++i) {
      NoisePath omega(seed_base + i, spec.step_h(), 1);
      const int64_t n = sys.align_steps(T);
      double w = 0.0;
      for (int64_t k = 0; k < n; ++k) w += omega.increment_component(k, 0);
      const double exact = std::exp((a - sigma * sigma / 2) * T + sigma * w);
      const double num = sys.evolve(T, omega, state1(0.0, 1.0)).x(0);
      total += std::abs(num - exact);
    }
    return total / paths;
  };
  const double e_coarse = run_error(128, 500);
  const double e_fine = run_error(256, 900);
  CHECK(e_coarse / e_fine == doctest::Approx(std::sqrt(2.0)).epsilon(0.25));
}

TEST_CASE("drift and diffusion are 1-periodic in s") {
  CHECK(periodicity_defect(forced_contraction_spec(0.05, 512)) < 1e-9);
  CHECK(periodicity_defect(double_well_spec(0.05, 0.02, 512)) < 1e-9);
}

TEST_CASE("integrator/interpretation pairing is enforced") {
  auto spec = linear_multiplicative_spec(-0.5, 0.3, 512, false);
  spec.interpretation = SdeSpec::Interpretation::ito;  // mismatched with heun
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);

  auto base_mismatch = linear_multiplicative_spec(-0.5, 0.3, 512, false);
  CHECK_THROWS_AS(build_cocycle(base_mismatch, BaseFlow::wiener(2, 1.0 / 512), "bad"),
                  std::invalid_argument);
}

TEST_CASE("drift returning non-finite values is reported") {
  SdeSpec spec;
  spec.dim = 1;
  spec.noise_dim = 0;
  spec.interpretation = SdeSpec::Interpretation::ito;
  spec.integrator = SdeSpec::Integrator::euler_maruyama;
  spec.steps_per_unit = 512;
  spec.drift = [](double, const Eigen::VectorXd& x, Eigen::VectorXd& out) {
    out(0) = std::sqrt(x(0));  // NaN for negative state
  };
  spec.drift_jacobian = [](double, const Eigen::VectorXd&, Eigen::MatrixXd& out) {
    out(0, 0) = 0.0;
  };
  auto sys = build_cocycle(spec, BaseFlow::wiener(0, 1.0 / 512), "bad_drift");
  NoisePath omega(1, sys.grid_step(), 0);
  CHECK_THROWS_AS(sys.evolve(1.0, omega, state1(0.0, -1.0)), std::runtime_error);
}
