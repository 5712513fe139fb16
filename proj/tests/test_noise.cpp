#include <cmath>
#include <set>

#include "doctest.h"
#include "rds/noise.hpp"

using namespace rds;

namespace {
constexpr double kGrid = 1.0 / 512.0;
}

TEST_CASE("increments are a pure function of (seed, slot)") {
  NoisePath p(42, kGrid, 3);
  const Eigen::VectorXd a = p.increment(-17);
  const Eigen::VectorXd b = p.increment(-17);
  CHECK(a == b);  // bit-identical

  NoisePath q(42, kGrid, 3);
  CHECK(q.increment(1000) == p.increment(1000));

  NoisePath other(43, kGrid, 3);
  CHECK(other.increment(0) != p.increment(0));
}

TEST_CASE("shift acts by index arithmetic") {
  NoisePath p(7, kGrid, 1);
  const double t = 1.0;
  NoisePath shifted = shift(p, t);
  const int64_t slots = std::llround(t / kGrid);
  for (int64_t k : {-5000ll, -1ll, 0ll, 3ll, 99999ll}) {
    CHECK(shifted.increment(k) == p.increment(k + slots));
  }

  // group law: inverse and identity
  NoisePath back = shift(shifted, -t);
  CHECK(back.same_base_point(p));
  CHECK(shift(p, 0.0).same_base_point(p));

  // additivity slot-for-slot
  NoisePath ab = shift(shift(p, 3.0), -7.0);
  NoisePath once = shift(p, -4.0);
  CHECK(ab.same_base_point(once));
}

TEST_CASE("shift rounding is reported and below half a slot") {
  NoisePath p(7, kGrid, 1);
  auto rep = shift_report(p, 1.0002);  // off-grid
  CHECK(std::abs(rep.rounding_error) < kGrid / 2);
  CHECK(rep.path.shift_offset() == std::llround(1.0002 / kGrid));
}

TEST_CASE("increment moments match N(0, grid_step)") {
  NoisePath p(2024, kGrid, 1);
  const int64_t n = 1'000'000;
  double sum = 0.0, sum_sq = 0.0;
  for (int64_t k = 0; k < n; ++k) {
    const double v = p.increment_component(k, 0);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  // CLT bound: 4 sigma / sqrt(n)
  CHECK(std::abs(mean) < 4.0 * std::sqrt(kGrid) / std::sqrt(double(n)));
  // chi-square: well inside 1% at this n
  CHECK(std::abs(var - kGrid) < 0.01 * kGrid);
}

TEST_CASE("empirical statistics are shift-invariant") {
  NoisePath p(99, kGrid, 1);
  NoisePath q = p.shifted_slots(1000);
  const int64_t n = 200'000;
  double m0 = 0, m1 = 0, v0 = 0, v1 = 0;
  for (int64_t k = 0; k < n; ++k) {
    const double a = p.increment_component(k, 0);
    const double b = q.increment_component(k, 0);
    m0 += a;
    m1 += b;
    v0 += a * a;
    v1 += b * b;
  }
  m0 /= n;
  m1 /= n;
  v0 = v0 / n - m0 * m0;
  v1 = v1 / n - m1 * m1;
  const double se_mean = std::sqrt(kGrid / n);
  const double se_var = kGrid * std::sqrt(2.0 / n);
  CHECK(std::abs(m0 - m1) < 3.0 * se_mean * std::sqrt(2.0));
  CHECK(std::abs(v0 - v1) < 3.0 * se_var * std::sqrt(2.0));
}

TEST_CASE("negative slots have their own stream") {
  NoisePath p(5, kGrid, 1);
  std::set<double> values;
  for (int64_t k = -50; k < 50; ++k) values.insert(p.increment_component(k, 0));
  CHECK(values.size() == 100);  // no accidental mirroring
}

TEST_CASE("ergodic component sampler: wiener base unrestricted") {
  auto samples = ergodic_component_sampler(BaseFlow::wiener(1, kGrid), 3, 5, 11);
  CHECK(samples.size() == 5);
  std::set<uint64_t> seeds;
  for (const auto& s : samples) seeds.insert(s.path.seed());
  CHECK(seeds.size() == 5);
}

TEST_CASE("ergodic component sampler: rational rotation picks one component") {
  auto flow = BaseFlow::rotation_rational(1, 2);
  auto samples = ergodic_component_sampler(flow, 2, 4, 13);
  CHECK(samples.size() == 4);
  for (const auto& s : samples) {
    CHECK(s.phase >= 0.0);
    CHECK(s.phase < 0.5);
  }
  // k=1: the two cells form a single cycle, phases unrestricted
  auto full = ergodic_component_sampler(flow, 1, 64, 13);
  bool seen_upper = false;
  for (const auto& s : full) seen_upper = seen_upper || s.phase >= 0.5;
  CHECK(seen_upper);
}

TEST_CASE("ergodic component sampler: irrational rotation unrestricted") {
  auto flow = BaseFlow::rotation_irrational(std::sqrt(2.0) - 1.0);
  auto samples = ergodic_component_sampler(flow, 2, 64, 17);
  bool seen_upper = false;
  for (const auto& s : samples) {
    CHECK(s.phase >= 0.0);
    CHECK(s.phase < 1.0);
    seen_upper = seen_upper || s.phase >= 0.5;
  }
  CHECK(seen_upper);
}

TEST_CASE("sampler rejects bad arguments") {
  CHECK_THROWS_AS(ergodic_component_sampler(BaseFlow::wiener(1, kGrid), 0, 1, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(ergodic_component_sampler(BaseFlow::wiener(1, kGrid), 1, 0, 0),
                  std::invalid_argument);
}
