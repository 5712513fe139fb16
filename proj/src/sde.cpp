#include "rds/sde.hpp"

#include <cmath>

namespace rds {

void SdeSpec::validate() const {
  if (dim < 1) throw std::invalid_argument("SdeSpec: dim must be >= 1");
  if (noise_dim < 0) throw std::invalid_argument("SdeSpec: noise_dim must be >= 0");
  if (steps_per_unit < 1) throw std::invalid_argument("SdeSpec: steps_per_unit must be >= 1");
  if (!drift || !drift_jacobian) throw std::invalid_argument("SdeSpec: drift callbacks required");
  if (noise_dim > 0 && (!diffusion || !diffusion_jacobian))
    throw std::invalid_argument("SdeSpec: diffusion callbacks required when noise_dim > 0");
  if (integrator == Integrator::heun_stratonovich &&
      interpretation != Interpretation::stratonovich)
    throw std::invalid_argument("SdeSpec: heun_stratonovich requires stratonovich interpretation");
  if (integrator == Integrator::euler_maruyama && interpretation != Interpretation::ito)
    throw std::invalid_argument("SdeSpec: euler_maruyama requires ito interpretation");
}

namespace {

struct StepWorkspace {
  Eigen::VectorXd f0, f1, pred, dw;
  Eigen::MatrixXd g0, g1, fx0, fx1, gxk, jpred, tmp;

  void resize(int d, int m) {
    f0.resize(d);
    f1.resize(d);
    pred.resize(d);
    dw.resize(std::max(m, 1));
    g0.resize(d, std::max(m, 1));
    g1.resize(d, std::max(m, 1));
    fx0.resize(d, d);
    fx1.resize(d, d);
    gxk.resize(d, d);
    jpred.resize(d, d);
    tmp.resize(d, d);
  }
};

void check_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) throw std::runtime_error(std::string(what) + " produced NaN/Inf");
}

// s of the next grid step, used only to evaluate F, G at the predictor stage;
// state-side circle tracking stays with the evolver's integer ticks.
double next_s(double s, int steps_per_unit) {
  const double s1 = s + 1.0 / static_cast<double>(steps_per_unit);
  return s1 >= 1.0 ? s1 - 1.0 : s1;
}

}  // namespace

void integrate_step(const SdeSpec& spec, const NoisePath& path, int64_t slot, double s,
                    Eigen::Ref<Eigen::VectorXd> x, Eigen::MatrixXd* jac) {
  thread_local StepWorkspace ws;
  const int d = spec.dim;
  const int m = spec.noise_dim;
  if (ws.f0.size() != d || ws.g0.cols() != std::max(m, 1)) ws.resize(d, m);

  const double h = spec.step_h();
  spec.drift(s, x, ws.f0);
  check_finite(ws.f0, "drift");
  if (m > 0) {
    for (int k = 0; k < m; ++k) ws.dw(k) = path.increment_component(slot, k);
    spec.diffusion(s, x, ws.g0);
    if (!ws.g0.allFinite()) throw std::runtime_error("diffusion produced NaN/Inf");
  }

  if (spec.integrator == SdeSpec::Integrator::euler_maruyama) {
    if (jac) {
      spec.drift_jacobian(s, x, ws.fx0);
      jac->setIdentity(d, d);
      *jac += h * ws.fx0;
      for (int k = 0; k < m; ++k) {
        spec.diffusion_jacobian(s, x, k, ws.gxk);
        *jac += ws.dw(k) * ws.gxk;
      }
    }
    x += h * ws.f0;
    if (m > 0) x += ws.g0.leftCols(m) * ws.dw.head(m);
    return;
  }

  // Heun predictor-corrector (Stratonovich).
  ws.pred = x + h * ws.f0;
  if (m > 0) ws.pred += ws.g0.leftCols(m) * ws.dw.head(m);
  const double s1 = next_s(s, spec.steps_per_unit);
  spec.drift(s1, ws.pred, ws.f1);
  check_finite(ws.f1, "drift");
  if (m > 0) {
    spec.diffusion(s1, ws.pred, ws.g1);
    if (!ws.g1.allFinite()) throw std::runtime_error("diffusion produced NaN/Inf");
  }

  if (jac) {
    spec.drift_jacobian(s, x, ws.fx0);
    ws.jpred.setIdentity(d, d);
    ws.jpred += h * ws.fx0;
    for (int k = 0; k < m; ++k) {
      spec.diffusion_jacobian(s, x, k, ws.gxk);
      ws.jpred += ws.dw(k) * ws.gxk;
    }
    spec.drift_jacobian(s1, ws.pred, ws.fx1);
    jac->setIdentity(d, d);
    ws.tmp.noalias() = ws.fx1 * ws.jpred;
    *jac += (0.5 * h) * (ws.fx0 + ws.tmp);
    for (int k = 0; k < m; ++k) {
      spec.diffusion_jacobian(s, x, k, ws.gxk);
      *jac += (0.5 * ws.dw(k)) * ws.gxk;
      spec.diffusion_jacobian(s1, ws.pred, k, ws.gxk);
      ws.tmp.noalias() = ws.gxk * ws.jpred;
      *jac += (0.5 * ws.dw(k)) * ws.tmp;
    }
  }

  x += (0.5 * h) * (ws.f0 + ws.f1);
  if (m > 0) x += 0.5 * ((ws.g0.leftCols(m) + ws.g1.leftCols(m)) * ws.dw.head(m));
}

CocycleSystem build_cocycle(const SdeSpec& spec, const BaseFlow& base, std::string name,
                            double escape_radius) {
  spec.validate();
  if (base.dimension != spec.noise_dim)
    throw std::invalid_argument("build_cocycle: base dimension " +
                                std::to_string(base.dimension) + " != diffusion columns " +
                                std::to_string(spec.noise_dim));
  const double expected_h = spec.step_h();
  if (std::abs(base.grid_step - expected_h) > 1e-15)
    throw std::invalid_argument("build_cocycle: base grid_step must equal 1/steps_per_unit");

  SdeSpec captured = spec;
  StepKernel kernel = [captured](const NoisePath& path, int64_t slot, double s,
                                 Eigen::Ref<Eigen::VectorXd> x, Eigen::MatrixXd* jac) {
    integrate_step(captured, path, slot, s, x, jac);
  };
  return CocycleSystem(spec.dim, spec.steps_per_unit, std::move(kernel), std::move(name),
                       escape_radius);
}

double periodicity_defect(const SdeSpec& spec, int samples) {
  const double almost_one = std::nextafter(1.0, 0.0);  // 1 - ulp
  Eigen::VectorXd x = Eigen::VectorXd::Constant(spec.dim, 0.37);
  Eigen::VectorXd fa(spec.dim), fb(spec.dim);
  Eigen::MatrixXd ga, gb;
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double s = static_cast<double>(i) / static_cast<double>(samples);
    spec.drift(s, x, fa);
    spec.drift(s + almost_one, x, fb);
    worst = std::max(worst, (fa - fb).lpNorm<Eigen::Infinity>());
    if (spec.noise_dim > 0) {
      ga.resize(spec.dim, spec.noise_dim);
      gb.resize(spec.dim, spec.noise_dim);
      spec.diffusion(s, x, ga);
      spec.diffusion(s + almost_one, x, gb);
      worst = std::max(worst, (ga - gb).lpNorm<Eigen::Infinity>());
    }
  }
  return worst;
}

}  // namespace rds
