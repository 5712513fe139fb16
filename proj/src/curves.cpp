#include "rds/curves.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rds {

namespace {

// bounding-box diagonal of all cloud points
double cloud_extent(const FibreCloud& cloud) {
  bool any = false;
  Eigen::VectorXd lo, hi;
  for (const auto& bin : cloud.points) {
    for (const auto& p : bin) {
      if (!any) {
        lo = p;
        hi = p;
        any = true;
      } else {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
    }
  }
  return any ? (hi - lo).norm() : 0.0;
}

}  // namespace

ExtractionScales resolve_scales(const FibreCloud& cloud, const ExtractionParams& params) {
  const double extent = cloud_extent(cloud);
  ExtractionScales sc;
  sc.cluster_cut = params.cluster_cut > 0.0 ? params.cluster_cut : std::max(0.04 * extent, 1e-9);

  if (params.jump_threshold > 0.0) {
    sc.jump_threshold = params.jump_threshold;
  } else {
    // worst adjacent-bin movement of cluster centers, so the auto threshold
    // tracks the actual branch slope at this bin resolution
    double movement = 0.0;
    std::vector<Eigen::VectorXd> prev, cur;
    for (int b = 0; b <= cloud.bins; ++b) {
      cur = bin_cluster_centers(cloud.points[b % cloud.bins], sc.cluster_cut);
      if (b > 0 && !prev.empty() && !cur.empty()) {
        for (const auto& c : prev) {
          double nearest = std::numeric_limits<double>::infinity();
          for (const auto& n : cur) nearest = std::min(nearest, (c - n).norm());
          movement = std::max(movement, nearest);
        }
      }
      prev.swap(cur);
    }
    sc.jump_threshold = std::max({4.0 * movement, 0.02 * extent, 1e-9});
  }
  sc.tol_match = params.tol_match > 0.0 ? params.tol_match : sc.jump_threshold;
  sc.tol_curve = params.tol_curve > 0.0 ? params.tol_curve : 2.0 * std::max(cloud.tol_k, 1e-12);
  return sc;
}

namespace {

struct Chain {
  std::vector<Eigen::VectorXd> values;  // one per visited bin, in visit order
};

// Extends each chain into `centers` by nearest-to-prediction matching.
// Several chains may claim the same cluster (touching branches).
void extend_chains(std::vector<Chain>& chains, const std::vector<Eigen::VectorXd>& centers,
                   double jump_threshold, int bin_id) {
  if (centers.empty()) throw ExtractionError("strip hits an empty fibre bin", bin_id);
  for (auto& chain : chains) {
    const Eigen::VectorXd& last = chain.values.back();
    Eigen::VectorXd prediction = last;
    if (chain.values.size() >= 2)
      prediction = last + (last - chain.values[chain.values.size() - 2]);

    double best = std::numeric_limits<double>::infinity(), second = best;
    int best_idx = -1;
    for (size_t c = 0; c < centers.size(); ++c) {
      const double dist = (centers[c] - prediction).norm();
      if (dist < best) {
        second = best;
        best = dist;
        best_idx = static_cast<int>(c);
      } else {
        second = std::min(second, dist);
      }
    }
    const bool reachable =
        best <= jump_threshold && (centers[best_idx] - last).norm() <= jump_threshold;
    if (!reachable)
      throw ExtractionError("branch continuity break (no cluster within jump threshold)", bin_id);
    if (second <= jump_threshold && second - best < 0.1 * jump_threshold)
      throw ExtractionError("ambiguous branch continuation", bin_id);
    chain.values.push_back(centers[best_idx]);
  }
}

}  // namespace

std::vector<StripGraphs> extract_strip_graphs(const FibreCloud& cloud,
                                              const ExtractionParams& params) {
  const int M = params.strips;
  const int B = cloud.bins;
  if (M < 3) throw std::invalid_argument("extract_strip_graphs: need at least 3 strips");
  if (B % M != 0) throw std::invalid_argument("extract_strip_graphs: strips must divide bins");
  const int side = B / M;  // bins per 1/M interval
  if (side < 1) throw std::invalid_argument("extract_strip_graphs: strip narrower than a bin");
  const ExtractionScales sc = resolve_scales(cloud, params);

  // per-bin cluster centers, shared by all strips
  std::vector<std::vector<Eigen::VectorXd>> centers(B);
  for (int b = 0; b < B; ++b) centers[b] = bin_cluster_centers(cloud.points[b], sc.cluster_cut);

  std::vector<StripGraphs> strips;
  strips.reserve(M);
  for (int m = 0; m < M; ++m) {
    StripGraphs strip;
    strip.strip_index = m;
    strip.s_lo = static_cast<double>(m - 1) / M;
    strip.s_hi = static_cast<double>(m + 1) / M;
    for (int off = -side; off <= side; ++off)
      strip.bin_ids.push_back((((m * side + off) % B) + B) % B);

    // anchor at the widest fibre of the strip so merged (touching) bins
    // cannot hide branches
    int anchor = 0;
    size_t anchor_count = 0;
    for (size_t i = 0; i < strip.bin_ids.size(); ++i) {
      const size_t c = centers[strip.bin_ids[i]].size();
      if (c > anchor_count) {
        anchor_count = c;
        anchor = static_cast<int>(i);
      }
    }
    if (anchor_count == 0)
      throw ExtractionError("strip has no populated bins", strip.bin_ids.front());

    const auto& anchor_centers = centers[strip.bin_ids[anchor]];
    std::vector<Chain> right(anchor_count), left(anchor_count);
    for (size_t c = 0; c < anchor_count; ++c) {
      right[c].values.push_back(anchor_centers[c]);
      left[c].values.push_back(anchor_centers[c]);
    }
    for (size_t i = anchor + 1; i < strip.bin_ids.size(); ++i)
      extend_chains(right, centers[strip.bin_ids[i]], sc.jump_threshold, strip.bin_ids[i]);
    for (int i = anchor - 1; i >= 0; --i)
      extend_chains(left, centers[strip.bin_ids[i]], sc.jump_threshold, strip.bin_ids[i]);

    strip.branches.resize(anchor_count);
    strip.continuity_modulus.assign(anchor_count, 0.0);
    for (size_t c = 0; c < anchor_count; ++c) {
      auto& branch = strip.branches[c];
      branch.assign(left[c].values.rbegin(), left[c].values.rend());
      branch.insert(branch.end(), right[c].values.begin() + 1, right[c].values.end());
      for (size_t i = 0; i + 1 < branch.size(); ++i)
        strip.continuity_modulus[c] =
            std::max(strip.continuity_modulus[c], (branch[i + 1] - branch[i]).norm());
    }
    strips.push_back(std::move(strip));
  }

  for (const auto& s : strips) {
    if (s.branches.size() != strips.front().branches.size())
      throw ExtractionError("branch count differs between strips (set is not a graph union "
                            "at these tolerances)",
                            s.bin_ids.front());
  }
  return strips;
}

namespace {

// index of `bin` inside the strip's bin_ids
int strip_pos(const StripGraphs& strip, int bin) {
  for (size_t i = 0; i < strip.bin_ids.size(); ++i)
    if (strip.bin_ids[i] == bin) return static_cast<int>(i);
  return -1;
}

// sup distance between branch a of `from` and branch b of `to` over the
// given circle bins
double overlap_distance(const StripGraphs& from, int a, const StripGraphs& to, int b,
                        const std::vector<int>& bins) {
  double worst = 0.0;
  for (int bin : bins) {
    const int pa = strip_pos(from, bin);
    const int pb = strip_pos(to, bin);
    if (pa < 0 || pb < 0) continue;
    worst = std::max(worst, (from.branches[a][pa] - to.branches[b][pb]).norm());
  }
  return worst;
}

// unique sup-distance match of each branch of `from` to a branch of `to`
std::vector<int> match_strips(const StripGraphs& from, const StripGraphs& to,
                              const std::vector<int>& overlap_bins, double tol_match) {
  const size_t d = from.branches.size();
  std::vector<int> match(d, -1);
  std::vector<bool> taken(d, false);
  for (size_t a = 0; a < d; ++a) {
    int candidates = 0, pick = -1;
    double best = std::numeric_limits<double>::infinity();
    for (size_t b = 0; b < d; ++b) {
      const double dist = overlap_distance(from, static_cast<int>(a), to, static_cast<int>(b),
                                           overlap_bins);
      if (dist <= tol_match) ++candidates;
      if (dist < best) {
        best = dist;
        pick = static_cast<int>(b);
      }
    }
    if (candidates != 1 || best > tol_match)
      throw ExtractionError("stitching failed: no unique overlap match (candidates = " +
                                std::to_string(candidates) + ")",
                            overlap_bins.empty() ? -1 : overlap_bins.front());
    if (taken[pick])
      throw ExtractionError("stitching failed: two branches map to one continuation",
                            overlap_bins.empty() ? -1 : overlap_bins.front());
    taken[pick] = true;
    match[a] = pick;
  }
  return match;
}

}  // namespace

StitchResult stitch_and_lift(const std::vector<StripGraphs>& strips, const FibreCloud& cloud,
                             const ExtractionParams& params, bool backward) {
  if (strips.empty()) throw std::invalid_argument("stitch_and_lift: no strips");
  const int M = static_cast<int>(strips.size());
  const int B = cloud.bins;
  const int side = B / M;
  const size_t d = strips.front().branches.size();
  const ExtractionScales sc = resolve_scales(cloud, params);

  // overlap of consecutive strips m, m+1: circle bins [s_m, s_{m+1}]
  auto overlap_bins = [&](int m) {
    std::vector<int> bins;
    for (int off = 0; off <= side; ++off) bins.push_back(((m * side + off) % B + B) % B);
    return bins;
  };

  // label propagation around the circle; labels = strip-0 branch indices
  std::vector<int> label_of(d);
  std::iota(label_of.begin(), label_of.end(), 0);
  StitchResult res;
  res.permutation.assign(d, -1);
  res.branch_values.assign(d, std::vector<Eigen::VectorXd>(B));

  auto record_core = [&](const StripGraphs& strip, const std::vector<int>& labels) {
    // core of strip m: circle bins [s_m, s_{m+1})
    for (int off = 0; off < side; ++off) {
      const int bin = ((strip.strip_index * side + off) % B + B) % B;
      const int pos = strip_pos(strip, bin);
      for (size_t j = 0; j < d; ++j) res.branch_values[labels[j]][bin] = strip.branches[j][pos];
    }
  };

  if (!backward) {
    record_core(strips[0], label_of);
    for (int m = 0; m < M; ++m) {
      const auto& from = strips[m];
      const auto& to = strips[(m + 1) % M];
      // shared interval of strips m and m+1 is [s_m, s_{m+1}]
      const auto match = match_strips(from, to, overlap_bins(m), sc.tol_match);
      std::vector<int> next_labels(d, -1);
      for (size_t j = 0; j < d; ++j) next_labels[match[j]] = label_of[j];
      if (m + 1 < M) {
        label_of = next_labels;
        record_core(to, label_of);
      } else {
        // wrapped around: branch with label g continues as strip-0 branch b,
        // whose label is b itself
        for (size_t j = 0; j < d; ++j) res.permutation[label_of[j]] = match[j];
      }
    }
  } else {
    record_core(strips[0], label_of);
    for (int m = 0; m > -M; --m) {
      const int mm = ((m % M) + M) % M;
      const int prev = ((m - 1) % M + M) % M;
      const auto& from = strips[mm];
      const auto& to = strips[prev];
      const auto match = match_strips(from, to, overlap_bins(mm), sc.tol_match);
      std::vector<int> next_labels(d, -1);
      for (size_t j = 0; j < d; ++j) next_labels[match[j]] = label_of[j];
      if (m - 1 > -M) {
        label_of = next_labels;
        record_core(to, label_of);
      } else {
        for (size_t j = 0; j < d; ++j) res.permutation[label_of[j]] = match[j];
      }
    }
  }
  return res;
}

CycleDecomposition decompose_periods(const std::vector<int>& permutation) {
  const size_t d = permutation.size();
  std::vector<bool> seen_value(d, false);
  for (int v : permutation) {
    if (v < 0 || v >= static_cast<int>(d) || seen_value[v])
      throw std::invalid_argument("decompose_periods: not a permutation");
    seen_value[v] = true;
  }
  CycleDecomposition dec;
  std::vector<bool> visited(d, false);
  for (size_t start = 0; start < d; ++start) {
    if (visited[start]) continue;
    std::vector<int> cycle;
    int cur = static_cast<int>(start);
    do {
      visited[cur] = true;
      cycle.push_back(cur);
      cur = permutation[cur];
    } while (cur != static_cast<int>(start));
    dec.periods.push_back(static_cast<int>(cycle.size()));
    dec.cycles.push_back(std::move(cycle));
  }
  return dec;
}

std::vector<int> PeriodicCurveSet::period_multiset() const {
  std::vector<int> p;
  for (const auto& c : curves) p.push_back(c.period);
  std::sort(p.begin(), p.end());
  return p;
}

const Eigen::VectorXd& PeriodicCurveSet::sample(int curve, double s_lift) const {
  const auto& c = curves.at(curve);
  const double tau = static_cast<double>(c.period);
  double r = std::fmod(s_lift, tau);
  if (r < 0) r += tau;
  const int64_t idx = std::llround(r / bin_width);
  return c.samples[static_cast<size_t>(idx % static_cast<int64_t>(c.samples.size()))];
}

PeriodicCurveSet extract_periodic_curves(const FibreCloud& cloud,
                                         const ExtractionParams& params) {
  const auto strips = extract_strip_graphs(cloud, params);
  const auto stitched = stitch_and_lift(strips, cloud, params);
  const auto dec = decompose_periods(stitched.permutation);
  const ExtractionScales sc = resolve_scales(cloud, params);

  PeriodicCurveSet set;
  set.seed = cloud.seed;
  set.shift_slots = cloud.shift_slots;
  set.grid_step = cloud.grid_step;
  set.noise_dim = cloud.noise_dim;
  set.bins = cloud.bins;
  set.bin_width = cloud.bin_width;
  set.permutation = stitched.permutation;
  set.tol_curve = sc.tol_curve;

  for (size_t ci = 0; ci < dec.cycles.size(); ++ci) {
    PeriodicCurve curve;
    curve.period = dec.periods[ci];
    curve.labels = dec.cycles[ci];
    curve.samples.reserve(static_cast<size_t>(curve.period) * cloud.bins);
    // winding w follows branch pi^w(g0): phi(s + w) = phi_{pi^w(g0)}(s)
    for (int w = 0; w < curve.period; ++w) {
      const int label = curve.labels[w];
      for (int b = 0; b < cloud.bins; ++b)
        curve.samples.push_back(stitched.branch_values[label][b]);
    }
    set.curves.push_back(std::move(curve));
  }
  return set;
}

namespace {

// sup distance between two curves, minimized over winding offsets
double curve_distance(const PeriodicCurve& a, const PeriodicCurve& b, int bins) {
  if (a.period != b.period) return std::numeric_limits<double>::infinity();
  double best = std::numeric_limits<double>::infinity();
  const size_t n = a.samples.size();
  for (int w = 0; w < a.period; ++w) {
    double worst = 0.0;
    const size_t off = static_cast<size_t>(w) * bins;
    for (size_t i = 0; i < n; ++i)
      worst = std::max(worst, (a.samples[(i + off) % n] - b.samples[i]).norm());
    best = std::min(best, worst);
  }
  return best;
}

// minimal total sup-distance assignment (n is small; greedy by best pair)
std::vector<int> match_curves(const PeriodicCurveSet& from, const PeriodicCurveSet& to) {
  const size_t n = from.curves.size();
  std::vector<int> match(n, -1);
  std::vector<bool> used(n, false);
  for (size_t step = 0; step < n; ++step) {
    double best = std::numeric_limits<double>::infinity();
    int bi = -1, bj = -1;
    for (size_t i = 0; i < n; ++i) {
      if (match[i] >= 0) continue;
      for (size_t j = 0; j < n; ++j) {
        if (used[j]) continue;
        const double d = curve_distance(from.curves[i], to.curves[j], from.bins);
        if (d < best) {
          best = d;
          bi = static_cast<int>(i);
          bj = static_cast<int>(j);
        }
      }
    }
    if (bi < 0) break;
    match[bi] = bj;
    used[bj] = true;
  }
  return match;
}

}  // namespace

PeriodicityReport verify_random_periodicity(const CocycleSystem& sys,
                                            const PeriodicCurveSet& at_omega,
                                            const PeriodicCurveSet& at_shifted, int k,
                                            double tol_period) {
  PeriodicityReport rep;
  rep.k = k;
  rep.tol = tol_period;
  if (at_omega.curves.size() != at_shifted.curves.size()) {
    rep.failure = "curve count mismatch: n(omega) = " + std::to_string(at_omega.curves.size()) +
                  ", n(theta_{-k} omega) = " + std::to_string(at_shifted.curves.size());
    return rep;
  }
  if (at_omega.bins != at_shifted.bins) {
    rep.failure = "curve sets sampled on different bin grids";
    return rep;
  }

  // the evolved image of the shifted-set curves should be the omega-set
  // curves; match in sup distance
  rep.matching = match_curves(at_shifted, at_omega);
  NoisePath pulled = NoisePath(at_omega.seed, at_omega.grid_step, at_omega.noise_dim)
                         .shifted_slots(at_omega.shift_slots -
                                        static_cast<int64_t>(k) * sys.steps_per_unit());

  bool all_ok = true;
  for (size_t i = 0; i < at_shifted.curves.size(); ++i) {
    const auto& prev = at_shifted.curves[i];
    const int j = rep.matching[i];
    const auto& cur = at_omega.curves[j];
    if (prev.period != cur.period) {
      rep.failure = "matched curves disagree on winding period";
      return rep;
    }
    double worst = 0.0;
    const int tau = prev.period;
    for (int w = 0; w < tau; ++w) {
      for (int b = 0; b < at_shifted.bins; ++b) {
        const double s_lift = static_cast<double>(w) + at_shifted.bin_width * b;
        const Eigen::VectorXd& x_prev = prev.samples[static_cast<size_t>(w) * at_shifted.bins + b];
        CylinderState z(at_shifted.bin_width * b, x_prev);
        CylinderState image = sys.evolve(static_cast<double>(k), pulled, z);
        if (image.s != z.s) {
          rep.failure = "circle coordinate did not return after whole periods";
          return rep;
        }
        // lift advances by k: compare at (s + k) mod tau on the target curve
        const Eigen::VectorXd& x_cur = at_omega.sample(j, s_lift + static_cast<double>(k));
        worst = std::max(worst, (image.x - x_cur).norm());
      }
    }
    rep.residuals.push_back(worst);
    all_ok = all_ok && worst <= tol_period;
  }
  rep.pass = all_ok;
  return rep;
}

ShiftInvarianceReport verify_period_shift_invariance(const PeriodicCurveSet& a,
                                                     const PeriodicCurveSet& b) {
  ShiftInvarianceReport rep;
  if (a.period_multiset() != b.period_multiset()) {
    rep.pass = false;
    rep.diff = "period multisets differ";
    return rep;
  }
  if (a.curves.size() == b.curves.size()) {
    const auto match = match_curves(a, b);
    for (size_t i = 0; i < a.curves.size(); ++i) {
      if (match[i] < 0 || a.curves[i].period != b.curves[match[i]].period) {
        rep.pass = false;
        rep.diff = "matched curves disagree on periods";
        return rep;
      }
    }
  }
  rep.pass = true;
  return rep;
}

}  // namespace rds
