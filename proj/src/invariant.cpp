#include "rds/invariant.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "rds/parallel.hpp"

namespace rds {

namespace {

// Lattice of grid_per_axis^d points spanning the box, endpoints included.
std::vector<Eigen::VectorXd> box_lattice(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                         int per_axis) {
  const int d = static_cast<int>(lo.size());
  int64_t total = 1;
  for (int j = 0; j < d; ++j) total *= per_axis;
  std::vector<Eigen::VectorXd> pts;
  pts.reserve(total);
  for (int64_t idx = 0; idx < total; ++idx) {
    Eigen::VectorXd x(d);
    int64_t rest = idx;
    for (int j = 0; j < d; ++j) {
      const int cell = static_cast<int>(rest % per_axis);
      rest /= per_axis;
      const double t = per_axis == 1 ? 0.5 : static_cast<double>(cell) / (per_axis - 1);
      x(j) = lo(j) + t * (hi(j) - lo(j));
    }
    pts.push_back(std::move(x));
  }
  return pts;
}

std::vector<std::vector<Eigen::VectorXd>> run_pullback(const CocycleSystem& sys,
                                                       const NoisePath& omega,
                                                       const PullbackParams& p, double horizon) {
  const int bins = p.bins;
  const auto seeds = box_lattice(p.box_min, p.box_max, p.grid_per_axis);
  std::vector<std::vector<Eigen::VectorXd>> out(bins);
  const NoisePath pulled = shift(omega, -horizon);
  parallel_for(bins, p.workers, [&](int64_t b) {
    const double s_b = static_cast<double>(b) / bins;
    auto& bucket = out[b];
    bucket.reserve(seeds.size());
    for (const auto& x0 : seeds) {
      try {
        CylinderState z = sys.evolve(horizon, pulled, CylinderState(s_b, x0));
        bucket.push_back(std::move(z.x));
      } catch (const BlowupError& e) {
        throw DissipativityError(std::string("pullback escaped the absorbing region: ") +
                                 e.what());
      }
    }
  });
  return out;
}

int modal_count(const std::vector<int>& counts) {
  std::map<int, int> freq;
  for (int c : counts)
    if (c > 0) ++freq[c];
  int best = 0, best_freq = -1;
  for (const auto& [value, f] : freq) {
    if (f > best_freq) {
      best = value;
      best_freq = f;
    }
  }
  return best;
}

}  // namespace

double set_hausdorff(const std::vector<Eigen::VectorXd>& a,
                     const std::vector<Eigen::VectorXd>& b) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  auto one_sided = [](const std::vector<Eigen::VectorXd>& from,
                      const std::vector<Eigen::VectorXd>& to) {
    double worst = 0.0;
    for (const auto& x : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& y : to) best = std::min(best, (x - y).norm());
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(one_sided(a, b), one_sided(b, a));
}

double cloud_hausdorff(const FibreCloud& a, const FibreCloud& b) {
  if (a.bins != b.bins) throw std::invalid_argument("cloud_hausdorff: bin counts differ");
  double worst = 0.0;
  for (int i = 0; i < a.bins; ++i) worst = std::max(worst, set_hausdorff(a.points[i], b.points[i]));
  return worst;
}

FibreCloud pullback_attractor(const CocycleSystem& sys, const NoisePath& omega,
                              const PullbackParams& params) {
  if (params.box_min.size() != sys.dimension() || params.box_max.size() != sys.dimension())
    throw std::invalid_argument("pullback_attractor: box dimension mismatch");
  if (params.bins < 1 || sys.circle_resolution() % params.bins != 0)
    throw std::invalid_argument("pullback_attractor: bins must divide the circle resolution");
  const int64_t periods = std::llround(params.horizon);
  if (periods < 2 || std::abs(params.horizon - static_cast<double>(periods)) > 1e-12)
    throw std::invalid_argument("pullback_attractor: horizon must be a whole number >= 2 of t1");

  FibreCloud cloud;
  cloud.seed = omega.seed();
  cloud.shift_slots = omega.shift_offset();
  cloud.grid_step = omega.grid_step();
  cloud.noise_dim = omega.dimension();
  cloud.bins = params.bins;
  cloud.bin_width = 1.0 / params.bins;
  cloud.pullback_horizon = params.horizon;
  cloud.tol_k = params.tol_k > 0.0
                    ? params.tol_k
                    : 1e-3 * (params.box_max - params.box_min).norm();

  cloud.points = run_pullback(sys, omega, params, params.horizon);
  FibreCloud half = cloud;
  half.points = run_pullback(sys, omega, params, static_cast<double>(periods / 2));
  cloud.convergence_gap = cloud_hausdorff(cloud, half);
  cloud.accepted = cloud.convergence_gap <= cloud.tol_k;
  return cloud;
}

FibreCloud evolve_cloud(const CocycleSystem& sys, const NoisePath& omega_source,
                        const FibreCloud& cloud, int periods) {
  FibreCloud out = cloud;
  out.seed = omega_source.seed();
  out.shift_slots =
      omega_source.shift_offset() + static_cast<int64_t>(periods) * sys.steps_per_unit();
  for (int b = 0; b < cloud.bins; ++b) {
    const double s_b = cloud.bin_s(b);
    for (size_t i = 0; i < cloud.points[b].size(); ++i) {
      CylinderState z =
          sys.evolve(periods, omega_source, CylinderState(s_b, cloud.points[b][i]));
      out.points[b][i] = std::move(z.x);
    }
  }
  return out;
}

namespace {

int greedy_cover(const std::vector<Eigen::VectorXd>& pts, double eps) {
  std::vector<bool> covered(pts.size(), false);
  int count = 0;
  for (size_t i = 0; i < pts.size(); ++i) {
    if (covered[i]) continue;
    ++count;
    for (size_t j = i; j < pts.size(); ++j) {
      if (!covered[j] && (pts[i] - pts[j]).norm() <= eps) covered[j] = true;
    }
  }
  return count;
}

}  // namespace

CoveringProfile covering_number(const FibreCloud& cloud, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("covering_number: eps must be positive");
  CoveringProfile prof;
  prof.eps = eps;
  prof.upper.resize(cloud.bins, 0);
  prof.lower.resize(cloud.bins, 0);
  for (int b = 0; b < cloud.bins; ++b) {
    if (cloud.points[b].empty()) {
      prof.empty_bins.push_back(b);
      continue;
    }
    prof.upper[b] = greedy_cover(cloud.points[b], eps);
    prof.lower[b] = greedy_cover(cloud.points[b], 2.0 * eps);
    prof.max_upper = std::max(prof.max_upper, prof.upper[b]);
  }
  prof.candidate_n = modal_count(prof.upper);
  return prof;
}

std::vector<Eigen::VectorXd> bin_cluster_centers(const std::vector<Eigen::VectorXd>& pts,
                                                 double gap_threshold) {
  if (pts.empty()) return {};
  const size_t n = pts.size();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      if ((pts[i] - pts[j]).norm() <= gap_threshold) parent[find(int(j))] = find(int(i));

  std::map<int, std::pair<Eigen::VectorXd, int>> sums;
  for (size_t i = 0; i < n; ++i) {
    const int root = find(int(i));
    auto it = sums.find(root);
    if (it == sums.end())
      sums.emplace(root, std::make_pair(pts[i], 1));
    else {
      it->second.first += pts[i];
      it->second.second += 1;
    }
  }
  std::vector<Eigen::VectorXd> centers;
  centers.reserve(sums.size());
  for (auto& [root, acc] : sums) centers.push_back(acc.first / acc.second);
  std::sort(centers.begin(), centers.end(),
            [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
              for (int k = 0; k < a.size(); ++k)
                if (a(k) != b(k)) return a(k) < b(k);
              return false;
            });
  return centers;
}

CardinalityReport fibre_cardinality(const FibreCloud& cloud, double gap_threshold) {
  if (gap_threshold <= 0.0)
    throw std::invalid_argument("fibre_cardinality: gap threshold must be positive");

  // Noise floor: among spacings the cut would merge (nearest neighbours
  // within the threshold), the cut must sit well above the typical one,
  // otherwise it slices through in-cluster spacing and the result is
  // ordering-dependent.
  std::vector<double> merged_nn;
  for (const auto& pts : cloud.points) {
    std::vector<double> nn;
    for (size_t i = 0; i < pts.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (size_t j = 0; j < pts.size(); ++j)
        if (i != j) best = std::min(best, (pts[i] - pts[j]).norm());
      if (best <= gap_threshold) nn.push_back(best);
    }
    if (nn.empty()) continue;
    std::nth_element(nn.begin(), nn.begin() + nn.size() / 2, nn.end());
    merged_nn.push_back(nn[nn.size() / 2]);
  }
  if (!merged_nn.empty()) {
    std::nth_element(merged_nn.begin(), merged_nn.begin() + merged_nn.size() / 2,
                     merged_nn.end());
    const double floor = merged_nn[merged_nn.size() / 2];
    if (gap_threshold < 4.0 * floor)
      throw std::invalid_argument(
          "fibre_cardinality: gap threshold " + std::to_string(gap_threshold) +
          " is below the cloud noise floor (4 x median merged spacing = " +
          std::to_string(4 * floor) + "); clustering would be ill-posed");
  }

  CardinalityReport rep;
  rep.per_bin.resize(cloud.bins, 0);
  rep.labels.resize(cloud.bins);
  rep.min_separation = std::numeric_limits<double>::infinity();

  for (int b = 0; b < cloud.bins; ++b) {
    const auto& pts = cloud.points[b];
    auto& labels = rep.labels[b];
    labels.assign(pts.size(), -1);
    if (pts.empty()) continue;

    std::vector<int> parent(pts.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int i) {
      while (parent[i] != i) i = parent[i] = parent[parent[i]];
      return i;
    };
    for (size_t i = 0; i < pts.size(); ++i)
      for (size_t j = i + 1; j < pts.size(); ++j)
        if ((pts[i] - pts[j]).norm() <= gap_threshold) parent[find(int(j))] = find(int(i));

    std::map<int, int> label_of_root;
    for (size_t i = 0; i < pts.size(); ++i) {
      const int root = find(int(i));
      auto [it, inserted] = label_of_root.emplace(root, int(label_of_root.size()));
      labels[i] = it->second;
    }
    rep.per_bin[b] = static_cast<int>(label_of_root.size());

    for (size_t i = 0; i < pts.size(); ++i)
      for (size_t j = i + 1; j < pts.size(); ++j)
        if (labels[i] != labels[j])
          rep.min_separation = std::min(rep.min_separation, (pts[i] - pts[j]).norm());
  }

  rep.n = modal_count(rep.per_bin);
  for (int b = 0; b < cloud.bins; ++b)
    if (!cloud.points[b].empty() && rep.per_bin[b] != rep.n) rep.flagged_bins.push_back(b);
  if (!std::isfinite(rep.min_separation)) rep.min_separation = 0.0;
  return rep;
}

EmpiricalRandomMeasure krylov_bogolyubov(const CocycleSystem& sys, const NoisePath& omega,
                                         const std::vector<CylinderState>& nu0, int N) {
  if (N < 1) throw std::invalid_argument("krylov_bogolyubov: N must be >= 1");
  EmpiricalRandomMeasure mu;
  mu.seed = omega.seed();
  mu.shift_slots = omega.shift_offset();
  mu.horizon = N;
  mu.slices.reserve(N);

  std::vector<CylinderState> current = nu0;
  NoisePath base = omega;
  for (int n = 0; n < N; ++n) {
    EmpiricalRandomMeasure::Slice slice;
    slice.n = n;
    slice.points = current;
    slice.weight = 1.0 / N;
    mu.slices.push_back(std::move(slice));
    if (n + 1 < N) {
      for (auto& z : current) z = sys.evolve(1.0, base, z);
      base = base.shifted_slots(sys.steps_per_unit());
    }
  }
  return mu;
}

double measure_mean_distance(const EmpiricalRandomMeasure& mu,
                             const std::function<double(double)>& curve, int winding) {
  double acc = 0.0;
  double weight = 0.0;
  for (const auto& slice : mu.slices) {
    if (slice.points.empty()) continue;
    double slice_acc = 0.0;
    for (const auto& z : slice.points) {
      double best = std::numeric_limits<double>::infinity();
      for (int w = 0; w < std::max(1, winding); ++w)
        best = std::min(best, std::abs(z.x(0) - curve(z.s + w)));
      slice_acc += best;
    }
    acc += slice.weight * slice_acc / static_cast<double>(slice.points.size());
    weight += slice.weight;
  }
  return weight > 0.0 ? acc / weight : 0.0;
}

}  // namespace rds
