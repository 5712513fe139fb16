#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "rds/cocycle.hpp"
#include "rds/noise.hpp"

namespace rds {

/// A time-periodic SDE dX = F(s, X) dt + G(s, X) dW autonomized on the
/// cylinder: the physical period is normalized to one model-time unit, so the
/// circle coordinate s is wrapped time. Drift/diffusion callbacks receive s
/// already reduced mod 1; Jacobian callbacks supply the exact derivatives the
/// schemes differentiate.
struct SdeSpec {
  enum class Interpretation { ito, stratonovich };
  enum class Integrator { euler_maruyama, heun_stratonovich };

  int dim = 1;        // d
  int noise_dim = 0;  // m, 0 for deterministic systems

  std::function<void(double s, const Eigen::VectorXd& x, Eigen::VectorXd& out)> drift;
  std::function<void(double s, const Eigen::VectorXd& x, Eigen::MatrixXd& out)> drift_jacobian;
  // diffusion: d x m. diffusion_jacobian(k): derivative of column k in x, d x d.
  std::function<void(double s, const Eigen::VectorXd& x, Eigen::MatrixXd& out)> diffusion;
  std::function<void(double s, const Eigen::VectorXd& x, int k, Eigen::MatrixXd& out)>
      diffusion_jacobian;

  Interpretation interpretation = Interpretation::stratonovich;
  Integrator integrator = Integrator::heun_stratonovich;
  int steps_per_unit = 512;  // h = 1 / steps_per_unit

  double step_h() const { return 1.0 / static_cast<double>(steps_per_unit); }
  void validate() const;
};

/// One integrator step at grid slot `slot`: returns the updated state and, if
/// requested, the exact derivative of the scheme in x.
void integrate_step(const SdeSpec& spec, const NoisePath& path, int64_t slot, double s,
                    Eigen::Ref<Eigen::VectorXd> x, Eigen::MatrixXd* jac);

/// Wraps the spec into a CocycleSystem. The base must supply noise of the
/// matching dimension on the matching grid.
CocycleSystem build_cocycle(const SdeSpec& spec, const BaseFlow& base, std::string name = "sde",
                            double escape_radius = 1e6);

/// Largest deviation from 1-periodicity of F and G over sample points,
/// evaluating at s and at s + 1 - ulp.
double periodicity_defect(const SdeSpec& spec, int samples = 64);

}  // namespace rds
