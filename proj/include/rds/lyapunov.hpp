#pragma once

#include <optional>
#include <vector>

#include "rds/cocycle.hpp"
#include "rds/invariant.hpp"

namespace rds {

/// Forward Lyapunov spectrum estimate from QR-reorthonormalized tangent
/// propagation. Exponents are per unit time, sorted non-increasing.
struct LyapunovEstimate {
  Eigen::VectorXd exponents;
  Eigen::VectorXd standard_error;
  int64_t n_steps = 0;       // integrator substeps used per path
  double elapsed_time = 0.0;
  std::vector<Eigen::VectorXd> per_path;  // one exponent vector per path
  bool degenerate_warning = false;        // top two exponents within 2 SE
};

/// Single-path estimate; the standard error comes from blocking the log-R
/// series. n_steps counts integrator substeps and must be >= 100 * qr_stride.
LyapunovEstimate estimate_spectrum(const CocycleSystem& sys, const NoisePath& omega,
                                   const CylinderState& z, int64_t n_steps, int qr_stride);

/// Ensemble version: mean over paths, standard error from path dispersion.
LyapunovEstimate estimate_spectrum_ensemble(const CocycleSystem& sys,
                                            const std::vector<NoisePath>& paths,
                                            const CylinderState& z, int64_t n_steps,
                                            int qr_stride);

/// Empirical extremal exponent over the cloud:
/// inf_n (1/n) mean_paths max_points Phi_n.
struct ExtremalReport {
  double value = 0.0;
  std::vector<int> n_grid;
  std::vector<double> per_n;          // (1/n) E max Phi_n
  std::vector<int> non_monotone_n;    // n where the sequence rose beyond noise
  int points_used = 0;
};
struct ExtremalParams {
  std::vector<int> n_grid = {16, 32, 64, 128, 256, 512, 1024};
  int path_count = 8;
  uint64_t path_seed_base = 1000;
  int points_per_fibre = 2;  // cloud subsample cap per bin
  int bin_stride = 16;
};
ExtremalReport extremal_exponent(const CocycleSystem& sys, const FibreCloud& cloud,
                                 const ExtremalParams& params);

/// Deterministic subsample of cloud fibre points as cylinder states.
std::vector<CylinderState> sample_fibre_states(const FibreCloud& cloud, int points_per_fibre,
                                               int bin_stride);

/// Grouped subadditive records: one group per (path, shift) pair.
struct RecordGroup {
  uint64_t seed = 0;
  int64_t shift_slots = 0;
  std::vector<SubadditiveRecord> records;
};

/// Evaluates Phi_n over the n grid for `path_count` paths, each at every
/// listed shift (in units of t1), at the given fibre states.
std::vector<RecordGroup> collect_subadditive_records(const CocycleSystem& sys,
                                                     uint64_t seed_base, int path_count,
                                                     const std::vector<int>& shifts,
                                                     const std::vector<CylinderState>& states,
                                                     const std::vector<int>& n_grid,
                                                     int workers = 1);

/// Check of the semiuniform bound Phi_n <= C + n lambda': C is fitted as the
/// max deficit over the first half of the n grid and must cover the second
/// half; adjustedness is a zero-slope test of C against the shift magnitude.
struct SemiuniformReport {
  double lambda = 0.0;
  double lambda_prime = 0.0;
  struct PathFit {
    uint64_t seed = 0;
    int64_t shift_slots = 0;
    double C = 0.0;
    std::optional<int> first_good_n;  // least n with (1/n) Phi_n <= lambda - delta
  };
  std::vector<PathFit> fits;
  struct Violation {
    uint64_t seed = 0;
    int64_t shift_slots = 0;
    CylinderState state;
    int n = 0;
    double value = 0.0;   // Phi_n
    double bound = 0.0;   // C + n lambda'
  };
  std::vector<Violation> violations;
  bool adjusted_ok = true;
  double shift_slope = 0.0;
  double shift_slope_se = 0.0;
  bool pass() const { return violations.empty() && adjusted_ok; }
};
SemiuniformReport fit_adjusted_variable(const std::vector<RecordGroup>& groups,
                                        double lambda_prime,
                                        double lambda = std::numeric_limits<double>::quiet_NaN());

/// Exponential contraction envelope ||D_x phi(k)|| <= c e^{-delta k} sampled
/// on an r-neighborhood of the cloud fibres.
struct CertificateParams {
  double radius = 0.1;
  double c = 2.0;
  double delta = 0.9;
  std::vector<int> k_grid = {1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
  int samples_per_bin = 50;
  int bin_stride = 16;
  uint64_t sample_seed = 7;
  int workers = 1;
};
struct CertificateReport {
  bool pass = true;
  double worst_margin = -std::numeric_limits<double>::infinity();  // log||D|| - (log c - delta k)
  std::optional<int> first_fail_k;
  int samples = 0;
  int blowups = 0;
};
CertificateReport contraction_certificate(const CocycleSystem& sys, const FibreCloud& cloud,
                                          const CertificateParams& params);

}  // namespace rds
