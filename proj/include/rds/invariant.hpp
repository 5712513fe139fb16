#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "rds/cocycle.hpp"
#include "rds/noise.hpp"

namespace rds {

/// Thrown when a pullback run escapes: the seed box does not contain an
/// absorbing region for this system.
struct DissipativityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Sampled approximation of the random invariant set K(omega), organized as
/// s-binned fibre sections K(omega, s). Bin b holds points whose circle
/// coordinate is b * bin_width.
struct FibreCloud {
  // path identity (omega)
  uint64_t seed = 0;
  int64_t shift_slots = 0;
  double grid_step = 0.0;
  int noise_dim = 0;

  int bins = 256;
  double bin_width = 1.0 / 256.0;
  std::vector<std::vector<Eigen::VectorXd>> points;  // per bin

  double pullback_horizon = 0.0;
  double convergence_gap = 0.0;  // Hausdorff(T, T/2)
  double tol_k = 0.0;
  bool accepted = false;

  double bin_s(int b) const { return static_cast<double>(b) * bin_width; }
  NoisePath path() const {
    return NoisePath(seed, grid_step, noise_dim).shifted_slots(shift_slots);
  }
  size_t total_points() const {
    size_t n = 0;
    for (const auto& b : points) n += b.size();
    return n;
  }
};

struct PullbackParams {
  Eigen::VectorXd box_min, box_max;  // axis-aligned seed box (absorbing region)
  int grid_per_axis = 8;
  double horizon = 50.0;  // T, multiple of t1
  int bins = 256;
  double tol_k = 0.0;  // 0 -> 1e-3 * box diameter
  int workers = 1;
};

/// Evolves a gridded seed box from time -T under theta_{-T} omega up to time
/// 0 and bins the survivors by s. The returned cloud records the Hausdorff
/// gap between horizons T and T/2 and is accepted when the gap is below
/// tol_k. Escaping trajectories raise DissipativityError.
FibreCloud pullback_attractor(const CocycleSystem& sys, const NoisePath& omega,
                              const PullbackParams& params);

/// Hausdorff distance between two point sets in R^d (infinity if exactly one
/// is empty, 0 if both are).
double set_hausdorff(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b);

/// Max over bins of the per-bin Hausdorff distance.
double cloud_hausdorff(const FibreCloud& a, const FibreCloud& b);

/// phi(k t1, omega_source) applied pointwise; bins are preserved because the
/// circle returns after whole periods. Used by invariance checks:
/// evolve_cloud(sys, shift(omega, -k), cloud_at_shifted, k) ~ cloud_at_omega.
FibreCloud evolve_cloud(const CocycleSystem& sys, const NoisePath& omega_source,
                        const FibreCloud& cloud, int periods);

/// Greedy ball-covering counts per fibre section. `upper` is the greedy count
/// at radius eps (an upper bound for the true N_eps); `lower` the greedy
/// count at 2 eps (a lower bound).
struct CoveringProfile {
  double eps = 0.0;
  std::vector<int> upper;
  std::vector<int> lower;
  int max_upper = 0;
  int candidate_n = 0;  // modal upper count
  std::vector<int> empty_bins;
};
CoveringProfile covering_number(const FibreCloud& cloud, double eps);

/// Per-bin single-linkage clustering with an explicit gap cut: separation,
/// not density, defines distinctness of fibre points.
struct CardinalityReport {
  int n = 0;                          // modal cluster count over bins
  double min_separation = 0.0;        // c: least inter-cluster distance seen
  std::vector<int> per_bin;           // cluster count per bin
  std::vector<int> flagged_bins;      // bins disagreeing with the mode
  std::vector<std::vector<int>> labels;  // per bin, cluster label per point
};
CardinalityReport fibre_cardinality(const FibreCloud& cloud, double gap_threshold);

/// Cluster centers of one bin under the same single-linkage cut.
std::vector<Eigen::VectorXd> bin_cluster_centers(const std::vector<Eigen::VectorXd>& pts,
                                                 double gap_threshold);

/// Cesaro average of pushforwards of an initial sample set: slice n holds the
/// initial points evolved n full periods, based at theta^n omega, with
/// uniform weight 1/N per time slice.
struct EmpiricalRandomMeasure {
  uint64_t seed = 0;
  int64_t shift_slots = 0;
  int horizon = 0;  // N
  struct Slice {
    int n = 0;
    std::vector<CylinderState> points;
    double weight = 0.0;
  };
  std::vector<Slice> slices;
};
EmpiricalRandomMeasure krylov_bogolyubov(const CocycleSystem& sys, const NoisePath& omega,
                                         const std::vector<CylinderState>& nu0, int N);

/// Mean distance of the measure's samples to a periodic graph s -> x (d = 1),
/// weighted by slice weights. For a curve of winding tau the distance at
/// circle point s is the minimum over the tau lift positions s + w.
double measure_mean_distance(const EmpiricalRandomMeasure& mu,
                             const std::function<double(double)>& curve, int winding = 1);

}  // namespace rds
