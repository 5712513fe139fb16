#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "rds/noise.hpp"

namespace rds {

/// Thrown when a trajectory leaves the configured escape radius; signals a
/// non-dissipative input system rather than a numerical bug.
struct BlowupError : std::runtime_error {
  BlowupError(double norm, int64_t slot)
      : std::runtime_error("trajectory escaped: |x| = " + std::to_string(norm) +
                           " at slot " + std::to_string(slot)),
        norm(norm),
        slot(slot) {}
  double norm;
  int64_t slot;
};

inline double mod1(double s) {
  double r = s - std::floor(s);
  return r >= 1.0 ? r - 1.0 : r;
}

/// A point (s, x) on the cylinder S^1 x R^d. s is stored reduced mod 1.
struct CylinderState {
  double s = 0.0;
  Eigen::VectorXd x;

  CylinderState() = default;
  CylinderState(double s_, Eigen::VectorXd x_) : s(mod1(s_)), x(std::move(x_)) {}
};

inline bool states_equal(const CylinderState& a, const CylinderState& b, double tol = 0.0) {
  const double ds = std::abs(mod1(a.s) - mod1(b.s));
  const double circ = std::min(ds, 1.0 - ds);
  return circ <= tol && (a.x - b.x).lpNorm<Eigen::Infinity>() <= tol;
}

/// One integrator step: reads (path, slot, s, x), writes x in place and, when
/// `jac` is non-null, the exact derivative of the step map in x.
using StepKernel = std::function<void(const NoisePath&, int64_t slot, double s,
                                      Eigen::Ref<Eigen::VectorXd> x, Eigen::MatrixXd* jac)>;

/// A matrix carried as mat * exp(log_scale). Long Jacobian products are
/// rescaled whenever the raw norm would overflow, so the product of 10^5
/// one-step factors stays representable.
struct ScaledMatrix {
  Eigen::MatrixXd mat;
  double log_scale = 0.0;
  bool log_scaled = false;  // true once a rescale happened

  /// log of the operator 2-norm (largest singular value).
  double log_operator_norm() const;
  /// The plain matrix; throws if the value cannot be represented un-scaled.
  Eigen::MatrixXd dense() const;
};

/// The random dynamical system phi(t, omega, s, x) on the cylinder, together
/// with its fibre Jacobian D_x phi. The circle coordinate advances
/// deterministically at unit speed and is tracked in integer ticks of the
/// integration grid (h = 1/steps_per_unit), so s never accumulates float
/// error: after any number of steps it equals (s0 + n/P) mod 1 exactly.
class CocycleSystem {
 public:
  CocycleSystem(int dimension, int steps_per_unit, StepKernel kernel, std::string name,
                double escape_radius = 1e6);

  int dimension() const { return dim_; }
  int steps_per_unit() const { return steps_per_unit_; }
  double grid_step() const { return 1.0 / static_cast<double>(steps_per_unit_); }
  double rotation_period() const { return 1.0; }  // t1, normalized
  const std::string& name() const { return name_; }
  double escape_radius() const { return escape_radius_; }
  void set_escape_radius(double r) { escape_radius_ = r; }

  /// Ticks per unit time of the circle grid: lcm(steps_per_unit, 256), so both
  /// integration steps and the default fibre bins land on exact ticks.
  int64_t circle_resolution() const { return circle_resolution_; }

  /// Circle position <-> integer ticks. Throws if s is not tick-aligned; all
  /// states produced by the toolkit are.
  int64_t ticks(double s) const;
  double tick_to_s(int64_t tick) const {
    const int64_t q = circle_resolution_;
    const int64_t m = ((tick % q) + q) % q;
    return static_cast<double>(m) / static_cast<double>(q);
  }

  /// Number of grid steps in a time span; t must be grid-aligned.
  int64_t align_steps(double t) const;

  /// phi(t, omega, z). t must be a non-negative grid-aligned time.
  CylinderState evolve(double t, const NoisePath& path, const CylinderState& z) const;

  /// D_x phi(n, omega, z): ordered product of one-step Jacobians over n unit
  /// times (n * steps_per_unit grid steps). n = 0 gives the identity.
  ScaledMatrix jacobian_product(int n, const NoisePath& path, const CylinderState& z) const;

  struct PhiRecord {
    int n = 0;
    double value = 0.0;  // log ||D_x phi(n, omega, z)||, spectral norm
    CylinderState state;
    uint64_t seed = 0;
    int64_t shift_slots = 0;
  };

  /// Phi_n = log of the largest singular value of the n-unit-time Jacobian,
  /// accumulated in log-scaled form.
  PhiRecord phi_n(int n, const NoisePath& path, const CylinderState& z) const;

  /// Phi_n for every n in an increasing grid, sharing one trajectory pass.
  std::vector<PhiRecord> phi_n_grid(const std::vector<int>& n_grid, const NoisePath& path,
                                    const CylinderState& z) const;

 private:
  friend class CocycleEvolver;
  int dim_;
  int steps_per_unit_;
  int64_t circle_resolution_;  // Q ticks per unit; steps advance Q/P ticks
  int64_t ticks_per_step_;
  StepKernel kernel_;
  std::string name_;
  double escape_radius_;
};

using SubadditiveRecord = CocycleSystem::PhiRecord;

/// Stepwise walker over one trajectory: keeps (slot, tick, x) and exposes the
/// one-step Jacobian so spectrum/certificate code can consume substeps
/// without re-evolving prefixes.
class CocycleEvolver {
 public:
  CocycleEvolver(const CocycleSystem& sys, const NoisePath& path, const CylinderState& z);

  /// Advance one grid step; fills jac (d x d) with the step derivative when
  /// non-null. Throws BlowupError past the escape radius.
  void step(Eigen::MatrixXd* jac);

  int64_t slot() const { return slot_; }
  double s() const { return sys_->tick_to_s(tick_); }
  const Eigen::VectorXd& x() const { return x_; }
  CylinderState state() const { return CylinderState(s(), x_); }

 private:
  const CocycleSystem* sys_;
  NoisePath path_;
  int64_t slot_ = 0;
  int64_t tick_ = 0;
  Eigen::VectorXd x_;
};

/// The time-t1 reduction H-hat of the system: one step per full rotation.
class DiscreteSystem {
 public:
  explicit DiscreteSystem(const CocycleSystem& sys) : sys_(&sys) {}

  const CocycleSystem& continuous() const { return *sys_; }

  /// One H-hat step = evolve over t1. The base moves by steps_per_unit slots.
  CylinderState step(const NoisePath& path, const CylinderState& z, int n = 1) const {
    return sys_->evolve(static_cast<double>(n), path, z);
  }
  NoisePath shift_base(const NoisePath& path, int n = 1) const {
    return path.shifted_slots(static_cast<int64_t>(n) * sys_->steps_per_unit());
  }

 private:
  const CocycleSystem* sys_;
};

inline DiscreteSystem discrete_reduction(const CocycleSystem& sys) { return DiscreteSystem(sys); }

/// Bound used by the cocycle-law checks: scales with the scheme's local
/// truncation order and the number of composed steps. The discrete flow
/// composes exactly, so observed residuals sit far below this.
double cocycle_tolerance(int local_order, double grid_step, int64_t steps, double state_scale);

}  // namespace rds
