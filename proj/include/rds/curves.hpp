#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rds/cocycle.hpp"
#include "rds/invariant.hpp"

namespace rds {

struct ExtractionError : std::runtime_error {
  ExtractionError(const std::string& what, int bin) : std::runtime_error(what), bin(bin) {}
  int bin;
};

struct ExtractionParams {
  int strips = 8;               // M; must divide the bin count
  double jump_threshold = 0.0;  // 0 -> auto from the cloud scale
  double cluster_cut = 0.0;     // 0 -> auto
  double tol_match = 0.0;       // 0 -> auto (= jump_threshold)
  double tol_curve = 0.0;       // 0 -> 2 * cloud tol_k
};

/// Derived thresholds actually used by an extraction (auto rules resolved).
struct ExtractionScales {
  double jump_threshold = 0.0;
  double cluster_cut = 0.0;
  double tol_match = 0.0;
  double tol_curve = 0.0;
};
ExtractionScales resolve_scales(const FibreCloud& cloud, const ExtractionParams& params);

/// Branches of the strip D_[s_{m-1}, s_{m+1}]: per-bin polylines chained by
/// nearest-to-prediction continuation with slope extrapolation, so touching
/// branches cross instead of merging.
struct StripGraphs {
  int strip_index = 0;
  double s_lo = 0.0, s_hi = 0.0;
  std::vector<int> bin_ids;  // circle bins covered, in order along the strip
  std::vector<std::vector<Eigen::VectorXd>> branches;  // branch -> value per bin
  std::vector<double> continuity_modulus;              // max adjacent jump per branch
};

std::vector<StripGraphs> extract_strip_graphs(const FibreCloud& cloud,
                                              const ExtractionParams& params);

/// Branch functions on the whole circle with consistent labels, plus the
/// label permutation induced by one revolution: branch i at lift s continues
/// as branch pi[i] at s + 1.
struct StitchResult {
  std::vector<int> permutation;
  std::vector<std::vector<Eigen::VectorXd>> branch_values;  // label -> value per circle bin
};
StitchResult stitch_and_lift(const std::vector<StripGraphs>& strips, const FibreCloud& cloud,
                             const ExtractionParams& params, bool backward = false);

/// Cycle decomposition: each cycle of length tau yields one curve winding tau.
struct CycleDecomposition {
  std::vector<std::vector<int>> cycles;
  std::vector<int> periods;  // tau_i = cycle length
};
CycleDecomposition decompose_periods(const std::vector<int>& permutation);

struct PeriodicCurve {
  int period = 1;                         // tau_i, winding number
  std::vector<int> labels;                // the branch cycle
  std::vector<Eigen::VectorXd> samples;   // period * bins values on the lift [0, tau)
};

struct PeriodicCurveSet {
  // omega identity
  uint64_t seed = 0;
  int64_t shift_slots = 0;
  double grid_step = 0.0;
  int noise_dim = 0;

  int bins = 0;
  double bin_width = 0.0;
  std::vector<PeriodicCurve> curves;
  std::vector<int> permutation;
  double tol_curve = 0.0;

  std::vector<int> period_multiset() const;  // sorted periods
  /// Curve value at lift coordinate s (nearest bin sample).
  const Eigen::VectorXd& sample(int curve, double s_lift) const;
};

/// Full extraction: strips -> stitch -> cycle decomposition.
PeriodicCurveSet extract_periodic_curves(const FibreCloud& cloud,
                                         const ExtractionParams& params);

/// Residuals of the random periodicity relation: points of the curve set at
/// theta_{-k t1} omega, pushed forward k periods along omega, must land on
/// the matched curve at omega (x within tol, s exactly).
struct PeriodicityReport {
  bool pass = false;
  double tol = 0.0;
  int k = 0;
  std::vector<int> matching;        // prev curve index -> current curve index
  std::vector<double> residuals;    // per prev curve
  std::string failure;              // nonempty when structure prevented the check
};
PeriodicityReport verify_random_periodicity(const CocycleSystem& sys,
                                            const PeriodicCurveSet& at_omega,
                                            const PeriodicCurveSet& at_shifted, int k,
                                            double tol_period);

/// tau_i(theta_{-t} omega) = tau_i(omega): period multisets agree and matched
/// curves carry equal periods.
struct ShiftInvarianceReport {
  bool pass = false;
  std::string diff;
};
ShiftInvarianceReport verify_period_shift_invariance(const PeriodicCurveSet& a,
                                                     const PeriodicCurveSet& b);

}  // namespace rds
