#include "rds/noise.hpp"

#include <cmath>
#include <numeric>

namespace rds {

namespace philox {

namespace {

constexpr uint32_t kMul0 = 0xD2511F53u;
constexpr uint32_t kMul1 = 0xCD9E8D57u;
constexpr uint32_t kWeyl0 = 0x9E3779B9u;
constexpr uint32_t kWeyl1 = 0xBB67AE85u;

inline void round_once(uint32_t ctr[4], const uint32_t key[2]) {
  const uint64_t p0 = static_cast<uint64_t>(kMul0) * ctr[0];
  const uint64_t p1 = static_cast<uint64_t>(kMul1) * ctr[2];
  const uint32_t out0 = static_cast<uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0];
  const uint32_t out1 = static_cast<uint32_t>(p1);
  const uint32_t out2 = static_cast<uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1];
  const uint32_t out3 = static_cast<uint32_t>(p0);
  ctr[0] = out0;
  ctr[1] = out1;
  ctr[2] = out2;
  ctr[3] = out3;
}

}  // namespace

Words generate(uint64_t key_lo, uint64_t key_hi, uint64_t ctr_lo, uint64_t ctr_hi) {
  uint32_t ctr[4] = {static_cast<uint32_t>(ctr_lo), static_cast<uint32_t>(ctr_lo >> 32),
                     static_cast<uint32_t>(ctr_hi), static_cast<uint32_t>(ctr_hi >> 32)};
  uint32_t key[2] = {static_cast<uint32_t>(key_lo ^ key_hi),
                     static_cast<uint32_t>((key_lo >> 32) ^ (key_hi >> 7))};
  for (int r = 0; r < 10; ++r) {
    round_once(ctr, key);
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  Words w;
  w.w[0] = ctr[0];
  w.w[1] = ctr[1];
  w.w[2] = ctr[2];
  w.w[3] = ctr[3];
  return w;
}

double to_unit_double(uint32_t hi, uint32_t lo) {
  const uint64_t bits = (static_cast<uint64_t>(hi) << 32) | lo;
  const uint64_t mant = (bits >> 11) + 1;  // 53 bits, shifted into (0, 2^53]
  return static_cast<double>(mant) * 0x1.0p-53;
}

}  // namespace philox

namespace {

double gaussian_draw(uint64_t seed, int64_t global_slot, int component) {
  const philox::Words w = philox::generate(
      seed, 0x5261746368657453ull + static_cast<uint64_t>(component),
      encode_slot(global_slot), static_cast<uint64_t>(component));
  const double u1 = philox::to_unit_double(w.w[0], w.w[1]);
  const double u2 = philox::to_unit_double(w.w[2], w.w[3]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

Eigen::VectorXd NoisePath::increment(int64_t slot) const {
  Eigen::VectorXd v(dimension_);
  for (int c = 0; c < dimension_; ++c) v(c) = increment_component(slot, c);
  return v;
}

double NoisePath::increment_component(int64_t slot, int component) const {
  const int64_t global = slot + shift_offset_;
  return gaussian_draw(seed_, global, component) * std::sqrt(grid_step_);
}

NoisePath shift(const NoisePath& path, double t) { return shift_report(path, t).path; }

ShiftReport shift_report(const NoisePath& path, double t) {
  const double ratio = t / path.grid_step();
  const int64_t slots = std::llround(ratio);
  const double err = t - static_cast<double>(slots) * path.grid_step();
  return ShiftReport{path.shifted_slots(slots), err};
}

BaseFlow BaseFlow::rotation_rational(int64_t num, int64_t den) {
  if (den <= 0) throw std::invalid_argument("rotation_rational: denominator must be positive");
  const int64_t g = std::gcd(num < 0 ? -num : num, den);
  BaseFlow f;
  f.kind = Kind::rotation;
  f.dimension = 0;
  f.alpha_num = num / g;
  f.alpha_den = den / g;
  f.alpha = static_cast<double>(f.alpha_num) / static_cast<double>(f.alpha_den);
  f.description = "rotation(" + std::to_string(f.alpha_num) + "/" + std::to_string(f.alpha_den) + ")";
  return f;
}

BaseFlow BaseFlow::rotation_irrational(double alpha) {
  BaseFlow f;
  f.kind = Kind::rotation;
  f.dimension = 0;
  f.alpha = alpha;
  f.alpha_num = 0;
  f.alpha_den = 0;
  f.description = "rotation(irrational)";
  return f;
}

std::vector<BaseSample> ergodic_component_sampler(const BaseFlow& flow, int k, int count,
                                                  uint64_t sampler_seed) {
  if (k < 1) throw std::invalid_argument("ergodic_component_sampler: k must be >= 1");
  if (count < 1) throw std::invalid_argument("ergodic_component_sampler: count must be >= 1");

  std::vector<BaseSample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const philox::Words w =
        philox::generate(sampler_seed, 0x636f6d706f6e656eull, static_cast<uint64_t>(i), 0);
    const uint64_t fresh_seed = (static_cast<uint64_t>(w.w[0]) << 32) | w.w[1];
    const double u = philox::to_unit_double(w.w[2], w.w[3]);

    double phase = 0.0;
    if (flow.kind != BaseFlow::Kind::wiener) {
      if (flow.alpha_den > 0) {
        // Rational rotation p/q: cells [j/q,(j+1)/q) are permuted by +k*p mod q;
        // the component of theta^k containing cell 0 is the cycle of cell 0.
        const int64_t q = flow.alpha_den;
        const int64_t step = ((static_cast<int64_t>(k) * flow.alpha_num) % q + q) % q;
        std::vector<int64_t> cycle;
        int64_t cell = 0;
        do {
          cycle.push_back(cell);
          cell = (cell + step) % q;
        } while (cell != 0);
        const auto pick = static_cast<size_t>(u * static_cast<double>(cycle.size()));
        const int64_t j = cycle[pick < cycle.size() ? pick : cycle.size() - 1];
        const double v = philox::to_unit_double(w.w[3], w.w[0]);
        phase = (static_cast<double>(j) + v) / static_cast<double>(q);
      } else {
        phase = u;  // irrational rotation: totally ergodic
      }
    }
    out.push_back(BaseSample{NoisePath(fresh_seed, flow.grid_step, flow.dimension), phase});
  }
  return out;
}

}  // namespace rds
