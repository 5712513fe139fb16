#include "rds/lyapunov.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/QR>

#include "rds/parallel.hpp"

namespace rds {

namespace {

// QR with positive diagonal of R; Q absorbs the signs.
void signed_qr(const Eigen::MatrixXd& m, Eigen::MatrixXd& q, Eigen::VectorXd& log_r_diag) {
  const auto qr = m.householderQr();
  Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  q = qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
  for (int j = 0; j < m.cols(); ++j) {
    const double d = r(j, j);
    if (d < 0.0) q.col(j) = -q.col(j);
    log_r_diag(j) = std::log(std::abs(d));
  }
}

Eigen::VectorXd sorted_desc(Eigen::VectorXd v) {
  std::sort(v.data(), v.data() + v.size(), std::greater<double>());
  return v;
}

}  // namespace

LyapunovEstimate estimate_spectrum(const CocycleSystem& sys, const NoisePath& omega,
                                   const CylinderState& z, int64_t n_steps, int qr_stride) {
  if (qr_stride < 1) throw std::invalid_argument("estimate_spectrum: qr_stride must be >= 1");
  if (n_steps < 100 * static_cast<int64_t>(qr_stride))
    throw std::invalid_argument("estimate_spectrum: n_steps must be >= 100 * qr_stride");

  const int d = sys.dimension();
  const double h = sys.grid_step();
  CocycleEvolver ev(sys, omega, z);
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd step_jac(d, d), acc(d, d);
  Eigen::VectorXd logsum = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd log_r(d);

  // blocking for a single-path standard error
  const int blocks = 16;
  std::vector<Eigen::VectorXd> block_sums(blocks, Eigen::VectorXd::Zero(d));
  std::vector<double> block_time(blocks, 0.0);

  int64_t done = 0;
  while (done < n_steps) {
    const int64_t chunk = std::min<int64_t>(qr_stride, n_steps - done);
    acc = q;
    for (int64_t i = 0; i < chunk; ++i) {
      ev.step(&step_jac);
      acc = step_jac * acc;
    }
    signed_qr(acc, q, log_r);
    logsum += log_r;
    const int blk = static_cast<int>((done * blocks) / n_steps);
    block_sums[blk] += log_r;
    block_time[blk] += static_cast<double>(chunk) * h;
    done += chunk;
  }

  LyapunovEstimate est;
  est.n_steps = n_steps;
  est.elapsed_time = static_cast<double>(n_steps) * h;
  est.exponents = sorted_desc(logsum / est.elapsed_time);
  est.per_path.push_back(est.exponents);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  std::vector<Eigen::VectorXd> block_rates;
  for (int b = 0; b < blocks; ++b) {
    if (block_time[b] <= 0.0) continue;
    block_rates.push_back(sorted_desc(block_sums[b] / block_time[b]));
    mean += block_rates.back();
  }
  est.standard_error = Eigen::VectorXd::Zero(d);
  if (block_rates.size() > 1) {
    mean /= static_cast<double>(block_rates.size());
    Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
    for (const auto& r : block_rates) var += (r - mean).cwiseAbs2();
    var /= static_cast<double>(block_rates.size() - 1);
    est.standard_error = (var / static_cast<double>(block_rates.size())).cwiseSqrt();
  }
  if (d > 1) {
    const double gap = est.exponents(0) - est.exponents(1);
    const double se = est.standard_error(0) + est.standard_error(1);
    est.degenerate_warning = gap <= 2.0 * se;
  }
  return est;
}

LyapunovEstimate estimate_spectrum_ensemble(const CocycleSystem& sys,
                                            const std::vector<NoisePath>& paths,
                                            const CylinderState& z, int64_t n_steps,
                                            int qr_stride) {
  if (paths.empty()) throw std::invalid_argument("estimate_spectrum_ensemble: no paths");
  const int d = sys.dimension();
  LyapunovEstimate est;
  est.n_steps = n_steps;
  est.elapsed_time = static_cast<double>(n_steps) * sys.grid_step();
  est.per_path.resize(paths.size());
  parallel_for(static_cast<int64_t>(paths.size()), 1, [&](int64_t i) {
    est.per_path[i] = estimate_spectrum(sys, paths[i], z, n_steps, qr_stride).exponents;
  });

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& e : est.per_path) mean += e;
  mean /= static_cast<double>(paths.size());
  est.exponents = mean;
  est.standard_error = Eigen::VectorXd::Zero(d);
  if (paths.size() > 1) {
    Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
    for (const auto& e : est.per_path) var += (e - mean).cwiseAbs2();
    var /= static_cast<double>(paths.size() - 1);
    est.standard_error = (var / static_cast<double>(paths.size())).cwiseSqrt();
  }
  if (d > 1) {
    const double gap = est.exponents(0) - est.exponents(1);
    est.degenerate_warning = gap <= 2.0 * (est.standard_error(0) + est.standard_error(1));
  }
  return est;
}

std::vector<CylinderState> sample_fibre_states(const FibreCloud& cloud, int points_per_fibre,
                                               int bin_stride) {
  std::vector<CylinderState> states;
  for (int b = 0; b < cloud.bins; b += std::max(1, bin_stride)) {
    const auto& pts = cloud.points[b];
    if (pts.empty()) continue;
    const int take = std::min<int>(points_per_fibre, static_cast<int>(pts.size()));
    const size_t stride = std::max<size_t>(1, pts.size() / take);
    for (size_t i = 0; i < pts.size() && static_cast<int>(i / stride) < take; i += stride)
      states.emplace_back(cloud.bin_s(b), pts[i]);
  }
  return states;
}

ExtremalReport extremal_exponent(const CocycleSystem& sys, const FibreCloud& cloud,
                                 const ExtremalParams& params) {
  const auto states = sample_fibre_states(cloud, params.points_per_fibre, params.bin_stride);
  if (states.empty())
    throw std::invalid_argument("extremal_exponent: cloud has no sampled fibre points");

  const auto& n_grid = params.n_grid;
  // max over cloud points of Phi_n, then mean over paths
  std::vector<std::vector<double>> path_max(params.path_count,
                                            std::vector<double>(n_grid.size(), -1e300));
  parallel_for(params.path_count, 1, [&](int64_t p) {
    NoisePath omega(params.path_seed_base + static_cast<uint64_t>(p), sys.grid_step(),
                    std::max(1, cloud.noise_dim));
    for (const auto& z : states) {
      const auto recs = sys.phi_n_grid(n_grid, omega, z);
      for (size_t i = 0; i < recs.size(); ++i)
        path_max[p][i] = std::max(path_max[p][i], recs[i].value);
    }
  });

  ExtremalReport rep;
  rep.n_grid = n_grid;
  rep.points_used = static_cast<int>(states.size());
  rep.per_n.resize(n_grid.size());
  std::vector<double> stderr_n(n_grid.size(), 0.0);
  for (size_t i = 0; i < n_grid.size(); ++i) {
    double mean = 0.0;
    for (int p = 0; p < params.path_count; ++p) mean += path_max[p][i];
    mean /= params.path_count;
    double var = 0.0;
    for (int p = 0; p < params.path_count; ++p)
      var += (path_max[p][i] - mean) * (path_max[p][i] - mean);
    if (params.path_count > 1) var /= params.path_count - 1;
    rep.per_n[i] = mean / n_grid[i];
    stderr_n[i] = std::sqrt(var / std::max(1, params.path_count)) / n_grid[i];
  }
  rep.value = *std::min_element(rep.per_n.begin(), rep.per_n.end());
  for (size_t i = 1; i < rep.per_n.size(); ++i) {
    const double rise = rep.per_n[i] - rep.per_n[i - 1];
    if (rise > 2.0 * (stderr_n[i] + stderr_n[i - 1]) + 1e-12)
      rep.non_monotone_n.push_back(n_grid[i]);
  }
  return rep;
}

std::vector<RecordGroup> collect_subadditive_records(const CocycleSystem& sys, uint64_t seed_base,
                                                     int path_count,
                                                     const std::vector<int>& shifts,
                                                     const std::vector<CylinderState>& states,
                                                     const std::vector<int>& n_grid,
                                                     int workers) {
  std::vector<RecordGroup> groups(static_cast<size_t>(path_count) * shifts.size());
  parallel_for(static_cast<int64_t>(groups.size()), workers, [&](int64_t gi) {
    const int p = static_cast<int>(gi / shifts.size());
    const int si = static_cast<int>(gi % shifts.size());
    RecordGroup& g = groups[gi];
    g.seed = seed_base + static_cast<uint64_t>(p);
    NoisePath omega = NoisePath(g.seed, sys.grid_step(), std::max(1, sys.dimension()))
                          .shifted_slots(static_cast<int64_t>(shifts[si]) * sys.steps_per_unit());
    g.shift_slots = omega.shift_offset();
    for (const auto& z : states) {
      auto recs = sys.phi_n_grid(n_grid, omega, z);
      g.records.insert(g.records.end(), recs.begin(), recs.end());
    }
  });
  return groups;
}

SemiuniformReport fit_adjusted_variable(const std::vector<RecordGroup>& groups,
                                        double lambda_prime, double lambda) {
  if (groups.empty()) throw std::invalid_argument("fit_adjusted_variable: no record groups");
  if (std::isnan(lambda)) lambda = lambda_prime < 0.0 ? lambda_prime / 2.0 : lambda_prime + 1.0;
  if (!(lambda > lambda_prime))
    throw std::invalid_argument("fit_adjusted_variable: lambda must exceed lambda_prime");

  SemiuniformReport rep;
  rep.lambda = lambda;
  rep.lambda_prime = lambda_prime;
  const double delta = (lambda - lambda_prime) / 2.0;

  for (const auto& g : groups) {
    if (g.records.empty()) continue;
    int n_min = g.records.front().n, n_max = g.records.front().n;
    for (const auto& r : g.records) {
      n_min = std::min(n_min, r.n);
      n_max = std::max(n_max, r.n);
    }
    const double n_mid = 0.5 * (n_min + n_max);

    // C from the early half of the n grid, clipped below at zero
    double c_fit = 0.0;
    for (const auto& r : g.records)
      if (r.n <= n_mid) c_fit = std::max(c_fit, r.value - r.n * lambda_prime);

    // the fitted C must keep covering the later half
    for (const auto& r : g.records) {
      if (r.n <= n_mid) continue;
      const double bound = c_fit + r.n * lambda_prime;
      if (r.value > bound + 1e-9) {
        rep.violations.push_back({g.seed, g.shift_slots, r.state, r.n, r.value, bound});
      }
    }

    SemiuniformReport::PathFit fit;
    fit.seed = g.seed;
    fit.shift_slots = g.shift_slots;
    fit.C = 0.0;
    for (const auto& r : g.records) fit.C = std::max(fit.C, r.value - r.n * lambda_prime);

    // Eq-style N: least n past which (1/n) Phi_n stays <= lambda - delta
    std::vector<std::pair<int, double>> worst_by_n;
    for (const auto& r : g.records) {
      auto it = std::find_if(worst_by_n.begin(), worst_by_n.end(),
                             [&](const auto& p) { return p.first == r.n; });
      if (it == worst_by_n.end())
        worst_by_n.emplace_back(r.n, r.value);
      else
        it->second = std::max(it->second, r.value);
    }
    std::sort(worst_by_n.begin(), worst_by_n.end());
    for (size_t i = 0; i < worst_by_n.size(); ++i) {
      bool good_tail = true;
      for (size_t j = i; j < worst_by_n.size(); ++j)
        good_tail = good_tail && worst_by_n[j].second / worst_by_n[j].first <= lambda - delta;
      if (good_tail) {
        fit.first_good_n = worst_by_n[i].first;
        break;
      }
    }
    rep.fits.push_back(std::move(fit));
  }

  // adjustedness proxy: C regressed on the shift magnitude should have slope
  // statistically indistinguishable from zero
  std::vector<std::pair<double, double>> pts;  // (|shift|, C)
  for (const auto& f : rep.fits)
    pts.emplace_back(std::abs(static_cast<double>(f.shift_slots)), f.C);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto& [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(pts.size());
  const double denom = n * sxx - sx * sx;
  if (denom > 1e-12 && pts.size() > 2) {
    const double slope = (n * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / n;
    double ss_res = 0.0;
    for (auto& [x, y] : pts) {
      const double e = y - (intercept + slope * x);
      ss_res += e * e;
    }
    const double sigma2 = ss_res / (n - 2);
    const double se = std::sqrt(sigma2 * n / denom);
    rep.shift_slope = slope;
    rep.shift_slope_se = se;
    rep.adjusted_ok = std::abs(slope) <= 1.96 * se + 1e-12;
  }
  return rep;
}

CertificateReport contraction_certificate(const CocycleSystem& sys, const FibreCloud& cloud,
                                          const CertificateParams& params) {
  if (params.radius <= 0.0)
    throw std::invalid_argument("contraction_certificate: radius must be positive");
  const int d = sys.dimension();
  const double log_c = std::log(params.c);

  struct Sample {
    CylinderState z;
  };
  std::vector<Sample> samples;
  for (int b = 0; b < cloud.bins; b += std::max(1, params.bin_stride)) {
    const auto& pts = cloud.points[b];
    if (pts.empty()) continue;
    for (int i = 0; i < params.samples_per_bin; ++i) {
      const auto w = philox::generate(params.sample_seed, static_cast<uint64_t>(b),
                                      static_cast<uint64_t>(i), 0x63657274ull);
      // uniform point in the radius-r ball around a cloud point (round robin)
      Eigen::VectorXd dir(d);
      for (int k = 0; k < d; ++k) {
        const auto wk = philox::generate(params.sample_seed, static_cast<uint64_t>(b),
                                         static_cast<uint64_t>(i), 0x646972ull + k);
        const double u1 = philox::to_unit_double(wk.w[0], wk.w[1]);
        const double u2 = philox::to_unit_double(wk.w[2], wk.w[3]);
        dir(k) = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
      }
      const double nrm = dir.norm();
      if (nrm > 0.0) dir /= nrm;
      const double u = philox::to_unit_double(w.w[0], w.w[1]);
      const double radial = params.radius * std::pow(u, 1.0 / d);
      const auto& center = pts[i % pts.size()];
      samples.push_back({CylinderState(cloud.bin_s(b), center + radial * dir)});
    }
  }

  CertificateReport rep;
  rep.samples = static_cast<int>(samples.size());
  std::vector<CertificateReport> partial(samples.size());
  const NoisePath omega = cloud.path();

  parallel_for(static_cast<int64_t>(samples.size()), params.workers, [&](int64_t si) {
    CertificateReport& local = partial[si];
    const int k_max = params.k_grid.back();
    try {
      CocycleEvolver ev(sys, omega, samples[si].z);
      Eigen::MatrixXd acc = Eigen::MatrixXd::Identity(d, d), jac(d, d), tmp(d, d);
      double log_scale = 0.0;
      size_t next = 0;
      for (int k = 1; k <= k_max && next < params.k_grid.size(); ++k) {
        for (int i = 0; i < sys.steps_per_unit(); ++i) {
          ev.step(&jac);
          tmp.noalias() = jac * acc;
          acc.swap(tmp);
        }
        const double norm = acc.lpNorm<Eigen::Infinity>();
        if (norm > 1e30 || norm < 1e-30) {
          acc /= norm;
          log_scale += std::log(norm);
        }
        if (k == params.k_grid[next]) {
          ScaledMatrix sm{acc, log_scale, log_scale != 0.0};
          const double log_norm = sm.log_operator_norm();
          const double margin = log_norm - (log_c - params.delta * k);
          local.worst_margin = std::max(local.worst_margin, margin);
          if (margin > 0.0) {
            local.pass = false;
            if (!local.first_fail_k) local.first_fail_k = k;
          }
          ++next;
        }
      }
    } catch (const BlowupError&) {
      local.pass = false;
      local.blowups = 1;
      if (!local.first_fail_k) local.first_fail_k = params.k_grid.back();
    }
  });

  for (const auto& p : partial) {
    rep.pass = rep.pass && p.pass;
    rep.worst_margin = std::max(rep.worst_margin, p.worst_margin);
    rep.blowups += p.blowups;
    if (p.first_fail_k && (!rep.first_fail_k || *p.first_fail_k < *rep.first_fail_k))
      rep.first_fail_k = p.first_fail_k;
  }
  return rep;
}

}  // namespace rds
