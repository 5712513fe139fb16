#include <cmath>

#include "doctest.h"
#include "rds/curves.hpp"
#include "rds/zoo.hpp"

using namespace rds;

namespace {

FibreCloud constant_two_curve_cloud(int bins = 64) {
  FibreCloud cloud;
  cloud.bins = bins;
  cloud.bin_width = 1.0 / bins;
  cloud.tol_k = 1e-6;
  cloud.accepted = true;
  cloud.grid_step = 1.0 / 512.0;
  cloud.noise_dim = 0;
  cloud.points.resize(bins);
  for (int b = 0; b < bins; ++b) {
    cloud.points[b].push_back(Eigen::VectorXd::Constant(1, 1.0));
    cloud.points[b].push_back(Eigen::VectorXd::Constant(1, -1.0));
  }
  return cloud;
}

FibreCloud pullback_cloud(const CocycleSystem& sys, uint64_t seed, int noise_dim, double horizon,
                          int bins = 64) {
  PullbackParams p;
  p.box_min = Eigen::VectorXd::Constant(1, -2.0);
  p.box_max = Eigen::VectorXd::Constant(1, 2.0);
  p.grid_per_axis = 4;
  p.horizon = horizon;
  p.bins = bins;
  NoisePath omega(seed, sys.grid_step(), noise_dim);
  return pullback_attractor(sys, omega, p);
}

FibreCloud pullback_cloud_at(const CocycleSystem& sys, const NoisePath& omega, double horizon,
                             int bins = 64) {
  PullbackParams p;
  p.box_min = Eigen::VectorXd::Constant(1, -2.0);
  p.box_max = Eigen::VectorXd::Constant(1, 2.0);
  p.grid_per_axis = 4;
  p.horizon = horizon;
  p.bins = bins;
  return pullback_attractor(sys, omega, p);
}

}  // namespace

TEST_CASE("cycle decomposition covers the label set") {
  auto id3 = decompose_periods({0, 1, 2});
  CHECK(id3.periods == std::vector<int>{1, 1, 1});

  auto swap2 = decompose_periods({1, 0});
  CHECK(swap2.periods == std::vector<int>{2});

  // (0 1 2)(3): curves with tau = {3, 1}, sum = 4 = label count
  auto mixed = decompose_periods({1, 2, 0, 3});
  std::vector<int> periods = mixed.periods;
  std::sort(periods.begin(), periods.end());
  CHECK(periods == std::vector<int>{1, 3});
  int total = 0;
  for (int p : mixed.periods) total += p;
  CHECK(total == 4);

  CHECK_THROWS_AS(decompose_periods({0, 0}), std::invalid_argument);
}

TEST_CASE("two constant curves: flat branches, identity permutation") {
  auto cloud = constant_two_curve_cloud();
  ExtractionParams params;
  auto strips = extract_strip_graphs(cloud, params);
  CHECK(strips.size() == 8);
  for (const auto& s : strips) {
    CHECK(s.branches.size() == 2);
    for (double m : s.continuity_modulus) CHECK(m == 0.0);
  }
  auto stitched = stitch_and_lift(strips, cloud, params);
  CHECK(stitched.permutation == std::vector<int>{0, 1});

  auto set = extract_periodic_curves(cloud, params);
  CHECK(set.curves.size() == 2);
  CHECK(set.period_multiset() == std::vector<int>{1, 1});
}

TEST_CASE("forced contraction: one branch per strip tracking the analytic curve") {
  auto sys = build_model("forced_contraction");
  auto cloud = pullback_cloud(sys, 31, 0, 30);
  ExtractionParams params;
  auto strips = extract_strip_graphs(cloud, params);
  for (const auto& s : strips) CHECK(s.branches.size() == 1);

  auto set = extract_periodic_curves(cloud, params);
  REQUIRE(set.curves.size() == 1);
  CHECK(set.curves[0].period == 1);
  CHECK(set.permutation == std::vector<int>{0});
  double worst = 0.0;
  for (int b = 0; b < set.bins; ++b)
    worst = std::max(worst,
                     std::abs(set.curves[0].samples[b](0) - forced_contraction_curve(set.bin_width * b)));
  CHECK(worst <= 1e-3);
}

TEST_CASE("winding-two model: transposition permutation, one curve of period 2") {
  auto sys = build_model("winding_two");
  auto cloud = pullback_cloud(sys, 32, 0, 20);
  ExtractionParams params;
  auto strips = extract_strip_graphs(cloud, params);
  for (const auto& s : strips) CHECK(s.branches.size() == 2);

  auto stitched = stitch_and_lift(strips, cloud, params);
  CHECK(stitched.permutation == std::vector<int>{1, 0});

  auto set = extract_periodic_curves(cloud, params);
  REQUIRE(set.curves.size() == 1);
  CHECK(set.curves[0].period == 2);
  // winding conservation: sum of periods = branch count
  CHECK(set.curves[0].period == static_cast<int>(stitched.permutation.size()));

  // the curve traces +-sin(pi s) through both windings (up to starting branch)
  double worst = 1e9;
  for (int sign : {1, -1}) {
    double w = 0.0;
    for (size_t i = 0; i < set.curves[0].samples.size(); ++i) {
      const double s_lift = set.bin_width * static_cast<double>(i);
      w = std::max(w, std::abs(set.curves[0].samples[i](0) - sign * std::sin(M_PI * s_lift)));
    }
    worst = std::min(worst, w);
  }
  CHECK(worst <= 1e-3);

  // graph property: one sample per lift bin, continuous across the whole lift
  CHECK(set.curves[0].samples.size() == static_cast<size_t>(2 * set.bins));
  const auto scales = resolve_scales(cloud, params);
  for (size_t i = 0; i < set.curves[0].samples.size(); ++i) {
    const auto& a = set.curves[0].samples[i];
    const auto& b = set.curves[0].samples[(i + 1) % set.curves[0].samples.size()];
    CHECK((a - b).norm() <= scales.jump_threshold);
  }
}

TEST_CASE("forward and backward stitching produce inverse permutations") {
  auto sys = build_model("winding_two");
  auto cloud = pullback_cloud(sys, 33, 0, 20);
  ExtractionParams params;
  auto strips = extract_strip_graphs(cloud, params);
  auto fwd = stitch_and_lift(strips, cloud, params, false);
  auto bwd = stitch_and_lift(strips, cloud, params, true);
  const size_t d = fwd.permutation.size();
  REQUIRE(bwd.permutation.size() == d);
  for (size_t i = 0; i < d; ++i) CHECK(bwd.permutation[fwd.permutation[i]] == static_cast<int>(i));
}

TEST_CASE("extraction reconstructs the accepted cloud") {
  auto sys = build_model("winding_two");
  auto cloud = pullback_cloud(sys, 34, 0, 20);
  auto set = extract_periodic_curves(cloud, ExtractionParams{});

  // curve samples reassembled into a cloud must be Hausdorff-close to it
  FibreCloud rebuilt = cloud;
  for (auto& bin : rebuilt.points) bin.clear();
  for (const auto& c : set.curves)
    for (size_t i = 0; i < c.samples.size(); ++i) rebuilt.points[i % cloud.bins].push_back(c.samples[i]);
  CHECK(cloud_hausdorff(rebuilt, cloud) <= 2.0 * cloud.tol_k);
}

TEST_CASE("strip extraction rejects bad parameters and non-graph input") {
  auto cloud = constant_two_curve_cloud();
  ExtractionParams bad;
  bad.strips = 2;
  CHECK_THROWS_AS(extract_strip_graphs(cloud, bad), std::invalid_argument);
  bad.strips = 7;  // does not divide 64
  CHECK_THROWS_AS(extract_strip_graphs(cloud, bad), std::invalid_argument);

  // a branch that ends mid-circle is not a graph over S^1
  auto broken = constant_two_curve_cloud();
  for (int b = 20; b < 28; ++b) broken.points[b].pop_back();
  CHECK_THROWS_AS(extract_periodic_curves(broken, ExtractionParams{}), ExtractionError);
}

TEST_CASE("random periodicity of the deterministic forced contraction") {
  auto sys = build_model("forced_contraction");
  NoisePath omega(41, sys.grid_step(), 0);
  auto cur = extract_periodic_curves(pullback_cloud_at(sys, omega, 30), {});
  auto prev = extract_periodic_curves(
      pullback_cloud_at(sys, omega.shifted_slots(-sys.steps_per_unit()), 30), {});
  auto rep = verify_random_periodicity(sys, cur, prev, 1, 1e-3);
  REQUIRE(rep.failure.empty());
  CHECK(rep.pass);
  REQUIRE(rep.residuals.size() == 1);
  CHECK(rep.residuals[0] <= 1e-3);
}

TEST_CASE("random periodicity of the noisy forced contraction") {
  auto sys = build_model("forced_contraction_noisy", {{"sigma", 0.05}});
  NoisePath omega(42, sys.grid_step(), 1);
  auto cloud_now = pullback_cloud_at(sys, omega, 30);
  auto cur = extract_periodic_curves(cloud_now, {});
  auto prev = extract_periodic_curves(
      pullback_cloud_at(sys, omega.shifted_slots(-sys.steps_per_unit()), 30), {});
  auto rep = verify_random_periodicity(sys, cur, prev, 1, 5.0 * cloud_now.tol_k);
  REQUIRE(rep.failure.empty());
  CHECK(rep.pass);

  // the curve genuinely moves with omega: same extraction at a far shift differs
  auto far = extract_periodic_curves(
      pullback_cloud_at(sys, omega.shifted_slots(-40 * sys.steps_per_unit()), 30), {});
  double moved = 0.0;
  for (int b = 0; b < cur.bins; ++b)
    moved = std::max(moved, (cur.curves[0].samples[b] - far.curves[0].samples[b]).norm());
  CHECK(moved > 5.0 * cloud_now.tol_k);
}

TEST_CASE("winding-two periodicity across one period") {
  auto sys = build_model("winding_two");
  NoisePath omega(43, sys.grid_step(), 0);
  auto cur = extract_periodic_curves(pullback_cloud_at(sys, omega, 20), {});
  auto prev = extract_periodic_curves(
      pullback_cloud_at(sys, omega.shifted_slots(-sys.steps_per_unit()), 20), {});
  auto rep = verify_random_periodicity(sys, cur, prev, 1, 1e-3);
  REQUIRE(rep.failure.empty());
  CHECK(rep.pass);
}

TEST_CASE("curve-count mismatch is reported as a structural failure") {
  auto sys = build_model("winding_two");
  NoisePath omega(44, sys.grid_step(), 0);
  auto cur = extract_periodic_curves(pullback_cloud_at(sys, omega, 20), {});
  auto broken = cur;
  broken.curves.push_back(broken.curves[0]);
  auto rep = verify_random_periodicity(sys, cur, broken, 1, 1e-3);
  CHECK_FALSE(rep.pass);
  CHECK(!rep.failure.empty());
}

TEST_CASE("period shift invariance and its negative path") {
  auto sys = build_model("winding_two");
  NoisePath omega(45, sys.grid_step(), 0);
  auto a = extract_periodic_curves(pullback_cloud_at(sys, omega, 20), {});
  auto b = extract_periodic_curves(
      pullback_cloud_at(sys, omega.shifted_slots(-sys.steps_per_unit()), 20), {});
  CHECK(a.period_multiset() == std::vector<int>{2});
  CHECK(b.period_multiset() == std::vector<int>{2});
  CHECK(verify_period_shift_invariance(a, b).pass);

  // corrupted input: periods {1,1} vs {2} must be reported unequal
  auto two = extract_periodic_curves(constant_two_curve_cloud(), {});
  CHECK_FALSE(verify_period_shift_invariance(a, two).pass);
}
