#pragma once

// Shared test oracles: finite-difference Jacobians and an exact-integer
// circle-motion reference. These deliberately avoid the library's analytic
// Jacobian and tick bookkeeping so they can certify them independently.

#include <cstdint>

#include <Eigen/Core>

#include "rds/cocycle.hpp"

namespace rds::testing {

/// Central finite difference of x -> evolve(n, path, (s, x)) in x.
inline Eigen::MatrixXd fd_jacobian(const CocycleSystem& sys, int n, const NoisePath& path,
                                   const CylinderState& z, double delta = 1e-3) {
  const int d = sys.dimension();
  Eigen::MatrixXd jac(d, d);
  for (int j = 0; j < d; ++j) {
    Eigen::VectorXd xp = z.x, xm = z.x;
    xp(j) += delta;
    xm(j) -= delta;
    const Eigen::VectorXd fp = sys.evolve(n, path, CylinderState(z.s, xp)).x;
    const Eigen::VectorXd fm = sys.evolve(n, path, CylinderState(z.s, xm)).x;
    jac.col(j) = (fp - fm) / (2.0 * delta);
  }
  return jac;
}

/// Exact rational value of (s0 + n steps) mod 1 on the tick grid, computed in
/// integer arithmetic end to end; returns the correctly rounded double.
inline double rational_circle_oracle(const CocycleSystem& sys, double s0, int64_t n_steps) {
  const int64_t q = sys.circle_resolution();
  const int64_t per_step = q / sys.steps_per_unit();
  const int64_t j0 = sys.ticks(s0);
  const __int128 total = static_cast<__int128>(j0) + static_cast<__int128>(n_steps) * per_step;
  const int64_t m = static_cast<int64_t>(((total % q) + q) % q);
  return static_cast<double>(m) / static_cast<double>(q);
}

}  // namespace rds::testing
