#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace rds {

/// Counter-mode pseudo-random words: Philox4x32-10.
///
/// Every word is a pure function of (key, counter), so a noise realization
/// can be evaluated at any slot, in any order, from any thread. Two-sided
/// time is handled by zig-zag encoding signed slots into the counter.
namespace philox {

struct Words {
  uint32_t w[4];
};

Words generate(uint64_t key_lo, uint64_t key_hi, uint64_t ctr_lo, uint64_t ctr_hi);

/// 53-bit uniform in (0, 1] from two 32-bit words (never exactly 0).
double to_unit_double(uint32_t hi, uint32_t lo);

}  // namespace philox

/// Encodes a signed slot index into a non-negative counter so that negative
/// slots get their own interleaved stream.
inline uint64_t encode_slot(int64_t slot) {
  return slot >= 0 ? 2ull * static_cast<uint64_t>(slot)
                   : 2ull * static_cast<uint64_t>(-(slot + 1)) + 1ull;
}

/// One realization of the driving noise: a two-sided sequence of Gaussian
/// increments dW over grid slots of width `grid_step`, plus the current
/// shift position. Together (seed, shift_offset) play the role of the base
/// point omega, and shifting the offset realizes theta_t.
///
/// All queries are pure functions of (seed, slot + shift_offset); values may
/// be copied freely and used concurrently.
class NoisePath {
 public:
  NoisePath(uint64_t seed, double grid_step, int dimension)
      : seed_(seed), grid_step_(grid_step), dimension_(dimension), shift_offset_(0) {
    if (grid_step <= 0.0) throw std::invalid_argument("NoisePath: grid_step must be positive");
    if (dimension < 0) throw std::invalid_argument("NoisePath: dimension must be >= 0");
  }

  uint64_t seed() const { return seed_; }
  double grid_step() const { return grid_step_; }
  int dimension() const { return dimension_; }
  int64_t shift_offset() const { return shift_offset_; }

  /// Gaussian increment vector for one grid slot; component-wise N(0, grid_step).
  Eigen::VectorXd increment(int64_t slot) const;
  /// Single component, avoiding the vector allocation in hot loops.
  double increment_component(int64_t slot, int component) const;

  /// theta_{n h}: advance by an exact number of grid slots.
  NoisePath shifted_slots(int64_t slots) const {
    NoisePath p = *this;
    p.shift_offset_ += slots;
    return p;
  }

  bool same_base_point(const NoisePath& other) const {
    return seed_ == other.seed_ && shift_offset_ == other.shift_offset_ &&
           grid_step_ == other.grid_step_ && dimension_ == other.dimension_;
  }

 private:
  uint64_t seed_;
  double grid_step_;
  int dimension_;
  int64_t shift_offset_;
};

/// theta_t for grid-aligned t. Off-grid times are rounded to the nearest slot;
/// the rounding error (always < grid_step/2) is available via shift_report.
NoisePath shift(const NoisePath& path, double t);

struct ShiftReport {
  NoisePath path;
  double rounding_error;  // t - slots * grid_step
};
ShiftReport shift_report(const NoisePath& path, double t);

/// The ergodic base system the cocycle is driven by. `wiener` is the
/// Gaussian-increment base above; `rotation` is a deterministic circle
/// rotation used by synthetic tests; `product` combines both.
struct BaseFlow {
  enum class Kind { wiener, rotation, product };

  Kind kind = Kind::wiener;
  int dimension = 1;       // m, number of Wiener components
  double grid_step = 1.0 / 512.0;
  double alpha = 0.0;      // rotation angle per unit time
  // Exact rational representation of alpha when known (den == 0 -> irrational).
  int64_t alpha_num = 0;
  int64_t alpha_den = 0;
  std::string description;

  static BaseFlow wiener(int m, double grid_step) {
    BaseFlow f;
    f.kind = Kind::wiener;
    f.dimension = m;
    f.grid_step = grid_step;
    f.description = "wiener(" + std::to_string(m) + ")";
    return f;
  }
  static BaseFlow rotation_rational(int64_t num, int64_t den);
  static BaseFlow rotation_irrational(double alpha);
};

/// One sample from the base: a noise path plus, for rotation bases, a phase.
struct BaseSample {
  NoisePath path;
  double phase = 0.0;
};

/// Draws `count` base samples inside one ergodic component of theta^k.
///
/// For the Wiener base theta^k is ergodic for every k, so seeds are
/// unrestricted. For a rational rotation p/q the circle splits into q cells
/// [j/q,(j+1)/q) permuted by the rotation; theta^k decomposes the cells into
/// gcd(k*p, q) cycles and the sampler confines phases to the cycle containing
/// cell 0. Irrational rotations are totally ergodic, phases unrestricted.
std::vector<BaseSample> ergodic_component_sampler(const BaseFlow& flow, int k, int count,
                                                  uint64_t sampler_seed);

}  // namespace rds
