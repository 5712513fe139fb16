#include "rds/cocycle.hpp"

#include <numeric>

#include <Eigen/SVD>

namespace rds {

double ScaledMatrix::log_operator_norm() const {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(mat);
  const double top = svd.singularValues()(0);
  return std::log(top) + log_scale;
}

Eigen::MatrixXd ScaledMatrix::dense() const {
  if (log_scale == 0.0) return mat;
  const double f = std::exp(log_scale);
  if (!std::isfinite(f)) throw std::overflow_error("ScaledMatrix: value not representable densely");
  return mat * f;
}

CocycleSystem::CocycleSystem(int dimension, int steps_per_unit, StepKernel kernel,
                             std::string name, double escape_radius)
    : dim_(dimension),
      steps_per_unit_(steps_per_unit),
      kernel_(std::move(kernel)),
      name_(std::move(name)),
      escape_radius_(escape_radius) {
  if (dimension < 1) throw std::invalid_argument("CocycleSystem: dimension must be >= 1");
  if (steps_per_unit < 1) throw std::invalid_argument("CocycleSystem: steps_per_unit >= 1");
  circle_resolution_ = std::lcm(static_cast<int64_t>(steps_per_unit), int64_t{256});
  ticks_per_step_ = circle_resolution_ / steps_per_unit;
}

int64_t CocycleSystem::ticks(double s) const {
  const double scaled = mod1(s) * static_cast<double>(circle_resolution_);
  const int64_t t = std::llround(scaled);
  if (std::abs(scaled - static_cast<double>(t)) > 1e-9) {
    throw std::invalid_argument("circle coordinate " + std::to_string(s) +
                                " is not aligned to the 1/" +
                                std::to_string(circle_resolution_) + " grid");
  }
  return t % circle_resolution_;
}

int64_t CocycleSystem::align_steps(double t) const {
  const double scaled = t * static_cast<double>(steps_per_unit_);
  const int64_t n = std::llround(scaled);
  if (std::abs(scaled - static_cast<double>(n)) > 1e-6 * std::max(1.0, std::abs(scaled))) {
    throw std::invalid_argument("time " + std::to_string(t) + " is not grid-aligned");
  }
  return n;
}

CocycleEvolver::CocycleEvolver(const CocycleSystem& sys, const NoisePath& path,
                               const CylinderState& z)
    : sys_(&sys), path_(path), slot_(0), tick_(sys.ticks(z.s)), x_(z.x) {
  if (z.x.size() != sys.dimension())
    throw std::invalid_argument("state dimension does not match system");
}

void CocycleEvolver::step(Eigen::MatrixXd* jac) {
  sys_->kernel_(path_, slot_, sys_->tick_to_s(tick_), x_, jac);
  ++slot_;
  tick_ = (tick_ + sys_->ticks_per_step_) % sys_->circle_resolution();
  const double norm = x_.lpNorm<Eigen::Infinity>();
  if (!(norm <= sys_->escape_radius())) throw BlowupError(norm, slot_);
}

CylinderState CocycleSystem::evolve(double t, const NoisePath& path, const CylinderState& z) const {
  const int64_t n = align_steps(t);
  if (n < 0) throw std::invalid_argument("evolve: negative time not supported");
  CocycleEvolver ev(*this, path, z);
  for (int64_t i = 0; i < n; ++i) ev.step(nullptr);
  return ev.state();
}

namespace {

constexpr double kOverflowGuard = 1e300;
constexpr int kRescaleStride = 10;

// Multiplies one-step Jacobians into acc, rescaling by the running norm
// whenever the raw product would overflow the guard.
void accumulate_product(const CocycleSystem& sys, const NoisePath& path, const CylinderState& z,
                        int64_t steps, ScaledMatrix& acc) {
  const int d = sys.dimension();
  acc.mat = Eigen::MatrixXd::Identity(d, d);
  acc.log_scale = 0.0;
  acc.log_scaled = false;
  if (steps == 0) return;

  CocycleEvolver ev(sys, path, z);
  Eigen::MatrixXd step_jac(d, d);
  Eigen::MatrixXd tmp(d, d);
  for (int64_t i = 0; i < steps; ++i) {
    ev.step(&step_jac);
    tmp.noalias() = step_jac * acc.mat;
    acc.mat.swap(tmp);
    const bool periodic = (i % kRescaleStride) == kRescaleStride - 1;
    const double norm = acc.mat.lpNorm<Eigen::Infinity>();
    if (norm > kOverflowGuard || (periodic && (norm > 1e30 || norm < 1e-30))) {
      acc.mat /= norm;
      acc.log_scale += std::log(norm);
      acc.log_scaled = true;
    }
  }
}

}  // namespace

ScaledMatrix CocycleSystem::jacobian_product(int n, const NoisePath& path,
                                             const CylinderState& z) const {
  if (n < 0) throw std::invalid_argument("jacobian_product: n must be >= 0");
  ScaledMatrix acc;
  accumulate_product(*this, path, z, static_cast<int64_t>(n) * steps_per_unit_, acc);
  return acc;
}

CocycleSystem::PhiRecord CocycleSystem::phi_n(int n, const NoisePath& path,
                                              const CylinderState& z) const {
  if (n < 1) throw std::invalid_argument("phi_n: n must be >= 1");
  const auto grid = phi_n_grid({n}, path, z);
  return grid.front();
}

std::vector<CocycleSystem::PhiRecord> CocycleSystem::phi_n_grid(const std::vector<int>& n_grid,
                                                                const NoisePath& path,
                                                                const CylinderState& z) const {
  for (size_t i = 0; i + 1 < n_grid.size(); ++i)
    if (n_grid[i + 1] <= n_grid[i])
      throw std::invalid_argument("phi_n_grid: n grid must be strictly increasing");
  if (!n_grid.empty() && n_grid.front() < 1)
    throw std::invalid_argument("phi_n_grid: n must be >= 1");

  std::vector<PhiRecord> out;
  out.reserve(n_grid.size());
  const int d = dim_;
  ScaledMatrix acc;
  acc.mat = Eigen::MatrixXd::Identity(d, d);

  CocycleEvolver ev(*this, path, z);
  Eigen::MatrixXd step_jac(d, d);
  Eigen::MatrixXd tmp(d, d);
  size_t next = 0;
  const int64_t total = n_grid.empty() ? 0 : static_cast<int64_t>(n_grid.back()) * steps_per_unit_;
  for (int64_t i = 0; i < total && next < n_grid.size(); ++i) {
    ev.step(&step_jac);
    tmp.noalias() = step_jac * acc.mat;
    acc.mat.swap(tmp);
    const double norm = acc.mat.lpNorm<Eigen::Infinity>();
    if ((i % kRescaleStride) == kRescaleStride - 1 && (norm > 1e30 || norm < 1e-30)) {
      acc.mat /= norm;
      acc.log_scale += std::log(norm);
      acc.log_scaled = true;
    }
    if (i + 1 == static_cast<int64_t>(n_grid[next]) * steps_per_unit_) {
      PhiRecord r;
      r.n = n_grid[next];
      r.value = acc.log_operator_norm();
      r.state = CylinderState(z.s, z.x);
      r.seed = path.seed();
      r.shift_slots = path.shift_offset();
      out.push_back(std::move(r));
      ++next;
    }
  }
  return out;
}

double cocycle_tolerance(int local_order, double grid_step, int64_t steps, double state_scale) {
  const double local = std::pow(grid_step, local_order);
  return 10.0 * static_cast<double>(steps) * local * std::max(1.0, state_scale) + 1e-12;
}

}  // namespace rds
