#include "rds/zoo.hpp"

#include <cmath>
#include <memory>
#include <mutex>

namespace rds {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

// cos(2*pi*s) with a lookup table on the integration grid; off-grid arguments
// fall back to libm.
struct Cos2PiTable {
  explicit Cos2PiTable(int p) : p(p), vals(p) {
    for (int j = 0; j < p; ++j) vals[j] = std::cos(kTwoPi * static_cast<double>(j) / p);
  }
  double operator()(double s) const {
    const double scaled = s * static_cast<double>(p);
    const int64_t j = std::llround(scaled);
    if (std::abs(scaled - static_cast<double>(j)) < 1e-12)
      return vals[static_cast<size_t>(((j % p) + p) % p)];
    return std::cos(kTwoPi * s);
  }
  int p;
  std::vector<double> vals;
};

double param(const ModelParams& params, const ModelParams& defaults, const std::string& key) {
  auto it = params.find(key);
  if (it != params.end()) return it->second;
  it = defaults.find(key);
  if (it != defaults.end()) return it->second;
  throw std::invalid_argument("model parameter missing: " + key);
}

SdeSpec deterministic_base_spec(int steps_per_unit) {
  SdeSpec spec;
  spec.dim = 1;
  spec.noise_dim = 0;
  spec.interpretation = SdeSpec::Interpretation::stratonovich;
  spec.integrator = SdeSpec::Integrator::heun_stratonovich;
  spec.steps_per_unit = steps_per_unit;
  return spec;
}

}  // namespace

double forced_contraction_curve(double s) {
  const double c = 1.0 + 4.0 * M_PI * M_PI;
  return (std::cos(kTwoPi * s) + kTwoPi * std::sin(kTwoPi * s)) / c;
}

SdeSpec forced_contraction_spec(double sigma, int steps_per_unit) {
  auto table = std::make_shared<Cos2PiTable>(steps_per_unit);
  SdeSpec spec = deterministic_base_spec(steps_per_unit);
  spec.drift = [table](double s, const Eigen::VectorXd& x, Eigen::VectorXd& out) {
    out(0) = -x(0) + (*table)(s);
  };
  spec.drift_jacobian = [](double, const Eigen::VectorXd&, Eigen::MatrixXd& out) {
    out(0, 0) = -1.0;
  };
  if (sigma != 0.0) {
    spec.noise_dim = 1;
    spec.diffusion = [sigma](double, const Eigen::VectorXd&, Eigen::MatrixXd& out) {
      out(0, 0) = sigma;
    };
    spec.diffusion_jacobian = [](double, const Eigen::VectorXd&, int, Eigen::MatrixXd& out) {
      out(0, 0) = 0.0;
    };
  }
  return spec;
}

SdeSpec linear_multiplicative_spec(double a, double sigma, int steps_per_unit, bool ito_euler) {
  SdeSpec spec;
  spec.dim = 1;
  spec.noise_dim = 1;
  spec.steps_per_unit = steps_per_unit;
  if (ito_euler) {
    spec.interpretation = SdeSpec::Interpretation::ito;
    spec.integrator = SdeSpec::Integrator::euler_maruyama;
  } else {
    spec.interpretation = SdeSpec::Interpretation::stratonovich;
    spec.integrator = SdeSpec::Integrator::heun_stratonovich;
  }
  spec.drift = [a](double, const Eigen::VectorXd& x, Eigen::VectorXd& out) { out(0) = a * x(0); };
  spec.drift_jacobian = [a](double, const Eigen::VectorXd&, Eigen::MatrixXd& out) {
    out(0, 0) = a;
  };
  spec.diffusion = [sigma](double, const Eigen::VectorXd& x, Eigen::MatrixXd& out) {
    out(0, 0) = sigma * x(0);
  };
  spec.diffusion_jacobian = [sigma](double, const Eigen::VectorXd&, int, Eigen::MatrixXd& out) {
    out(0, 0) = sigma;
  };
  return spec;
}

SdeSpec double_well_spec(double eps, double sigma, int steps_per_unit) {
  auto table = std::make_shared<Cos2PiTable>(steps_per_unit);
  SdeSpec spec = deterministic_base_spec(steps_per_unit);
  spec.drift = [table, eps](double s, const Eigen::VectorXd& x, Eigen::VectorXd& out) {
    out(0) = x(0) - x(0) * x(0) * x(0) + eps * (*table)(s);
  };
  spec.drift_jacobian = [](double, const Eigen::VectorXd& x, Eigen::MatrixXd& out) {
    out(0, 0) = 1.0 - 3.0 * x(0) * x(0);
  };
  if (sigma != 0.0) {
    spec.noise_dim = 1;
    spec.diffusion = [sigma](double, const Eigen::VectorXd&, Eigen::MatrixXd& out) {
      out(0, 0) = sigma;
    };
    spec.diffusion_jacobian = [](double, const Eigen::VectorXd&, int, Eigen::MatrixXd& out) {
      out(0, 0) = 0.0;
    };
  }
  return spec;
}

namespace {

// Winding-two synthetic system. The invariant set is {(s mod 1, sin(pi s)):
// s in [0, 2)}: the two fibre branches +-sin(pi s), a single closed curve of
// winding 2. One step maps a point toward the branch value nearest to it and
// transports it along the lift; branch selection is by sign of x (the
// branches bound the half planes), so the step is exact on the set.
CocycleSystem build_winding_two(double gamma, int steps_per_unit, double escape_radius) {
  const double h = 1.0 / static_cast<double>(steps_per_unit);
  const double decay = std::exp(-gamma * h);
  const int p = steps_per_unit;
  StepKernel kernel = [decay, h, p](const NoisePath&, int64_t, double s,
                                    Eigen::Ref<Eigen::VectorXd> x, Eigen::MatrixXd* jac) {
    const double u = x(0) >= 0.0 ? s : s + 1.0;  // lift of the nearest branch
    const double cur = std::sin(M_PI * u);
    const double nxt = std::sin(M_PI * (u + h));
    x(0) = nxt + decay * (x(0) - cur);
    if (jac) (*jac)(0, 0) = decay;
  };
  return CocycleSystem(1, p, std::move(kernel), "winding_two", escape_radius);
}

std::vector<ModelZooEntry> make_zoo() {
  std::vector<ModelZooEntry> zoo;

  {
    ModelZooEntry e;
    e.name = "forced_contraction";
    e.summary = "dx = (-x + cos 2*pi*s) dt; single attracting invariant curve";
    e.defaults = {{"sigma", 0.0}};
    e.build = [e_defaults = e.defaults](const ModelParams& p, int spu) {
      const double sigma = param(p, e_defaults, "sigma");
      BaseFlow base = BaseFlow::wiener(sigma == 0.0 ? 0 : 1, 1.0 / spu);
      return build_cocycle(forced_contraction_spec(sigma, spu), base, "forced_contraction");
    };
    e.facts.top_exponent = -1.0;
    e.facts.fibre_count = 1;
    e.facts.windings = {1};
    e.facts.curve = forced_contraction_curve;
    e.facts.provenance = {
        {"top_exponent", "constant Jacobian of the linear drift"},
        {"fibre_count", "contraction-mapping argument, single particular solution"},
        {"curve", "closed-form particular solution, verified by substitution"}};
    zoo.push_back(std::move(e));
  }

  {
    ModelZooEntry e;
    e.name = "forced_contraction_noisy";
    e.summary = "dx = (-x + cos 2*pi*s) dt + sigma dW; random single curve";
    e.defaults = {{"sigma", 0.05}};
    e.build = [e_defaults = e.defaults](const ModelParams& p, int spu) {
      const double sigma = param(p, e_defaults, "sigma");
      BaseFlow base = BaseFlow::wiener(1, 1.0 / spu);
      return build_cocycle(forced_contraction_spec(sigma, spu), base, "forced_contraction_noisy");
    };
    e.facts.top_exponent = -1.0;
    e.facts.fibre_count = 1;
    e.facts.windings = {1};
    e.facts.provenance = {{"top_exponent", "additive noise leaves the tangent flow untouched"},
                          {"fibre_count", "pullback limit of the affine flow"}};
    zoo.push_back(std::move(e));
  }

  {
    ModelZooEntry e;
    e.name = "linear_multiplicative";
    e.summary = "dx = a x dt + sigma x o dW (Stratonovich); top exponent a";
    e.defaults = {{"a", -0.5}, {"sigma", 0.3}};
    e.build = [e_defaults = e.defaults](const ModelParams& p, int spu) {
      const double a = param(p, e_defaults, "a");
      const double sigma = param(p, e_defaults, "sigma");
      BaseFlow base = BaseFlow::wiener(1, 1.0 / spu);
      return build_cocycle(linear_multiplicative_spec(a, sigma, spu), base,
                           "linear_multiplicative");
    };
    e.facts.top_exponent = -0.5;
    e.facts.fibre_count = 1;
    e.facts.windings = {1};
    e.facts.provenance = {
        {"top_exponent", "closed-form solution x(t) = x0 exp(a t + sigma W_t)"},
        {"fibre_count", "attractor is the zero section for a < 0"}};
    zoo.push_back(std::move(e));
  }

  {
    ModelZooEntry e;
    e.name = "double_well_forced";
    e.summary = "dx = (x - x^3 + eps cos 2*pi*s) dt + sigma dW; two curves at small eps, sigma";
    e.defaults = {{"eps", 0.05}, {"sigma", 0.0}};
    e.build = [e_defaults = e.defaults](const ModelParams& p, int spu) {
      const double eps = param(p, e_defaults, "eps");
      const double sigma = param(p, e_defaults, "sigma");
      BaseFlow base = BaseFlow::wiener(sigma == 0.0 ? 0 : 1, 1.0 / spu);
      return build_cocycle(double_well_spec(eps, sigma, spu), base, "double_well_forced");
    };
    e.facts.fibre_count = 2;
    e.facts.windings = {1, 1};
    e.facts.provenance = {
        {"fibre_count", "long-run simulation near the unperturbed wells x = +-1"}};
    zoo.push_back(std::move(e));
  }

  {
    ModelZooEntry e;
    e.name = "winding_two";
    e.summary = "synthetic map with invariant set {(s mod 1, sin pi s): s in [0,2)}";
    e.defaults = {{"gamma", 2.0}};
    e.is_sde = false;
    e.build = [e_defaults = e.defaults](const ModelParams& p, int spu) {
      return build_winding_two(param(p, e_defaults, "gamma"), spu, 1e6);
    };
    e.facts.top_exponent = -2.0;
    e.facts.fibre_count = 2;   // points per fibre away from the touch fibres
    e.facts.windings = {2};    // one curve winding twice
    e.facts.curve = [](double s_lift) { return std::sin(M_PI * s_lift); };
    e.facts.provenance = {
        {"windings", "explicit construction: the branches +-sin(pi s) close after two loops"},
        {"fibre_count", "construction, branches distinct except where sin(pi s) = 0"}};
    zoo.push_back(std::move(e));
  }

  {
    ModelZooEntry e;
    e.name = "contraction_map";
    e.summary = "one step per unit time, x -> c x (default c = 1/2)";
    e.defaults = {{"factor", 0.5}};
    e.is_sde = false;
    e.build = [e_defaults = e.defaults](const ModelParams& p, int) {
      const double c = param(p, e_defaults, "factor");
      Eigen::MatrixXd a(1, 1);
      a(0, 0) = c;
      return make_linear_map_system(a, "contraction_map");
    };
    e.facts.top_exponent = std::log(0.5);
    e.facts.provenance = {{"top_exponent", "scalar power"}};
    zoo.push_back(std::move(e));
  }

  {
    ModelZooEntry e;
    e.name = "expanding_map";
    e.summary = "one step per unit time, x -> 2 x; negative control";
    e.defaults = {};
    e.is_sde = false;
    e.build = [](const ModelParams&, int) {
      Eigen::MatrixXd a(1, 1);
      a(0, 0) = 2.0;
      return make_linear_map_system(a, "expanding_map");
    };
    e.facts.top_exponent = std::log(2.0);
    e.facts.provenance = {{"top_exponent", "scalar power"}};
    zoo.push_back(std::move(e));
  }

  {
    ModelZooEntry e;
    e.name = "pure_rotation";
    e.summary = "zero drift, zero diffusion: motion in s only";
    e.defaults = {};
    e.build = [](const ModelParams&, int spu) {
      SdeSpec spec = deterministic_base_spec(spu);
      spec.drift = [](double, const Eigen::VectorXd&, Eigen::VectorXd& out) { out(0) = 0.0; };
      spec.drift_jacobian = [](double, const Eigen::VectorXd&, Eigen::MatrixXd& out) {
        out(0, 0) = 0.0;
      };
      return build_cocycle(spec, BaseFlow::wiener(0, 1.0 / spu), "pure_rotation");
    };
    e.facts.top_exponent = 0.0;
    zoo.push_back(std::move(e));
  }

  return zoo;
}

}  // namespace

CocycleSystem make_linear_map_system(const Eigen::MatrixXd& A, std::string name) {
  if (A.rows() != A.cols()) throw std::invalid_argument("make_linear_map_system: square matrix");
  Eigen::MatrixXd a = A;
  StepKernel kernel = [a](const NoisePath&, int64_t, double, Eigen::Ref<Eigen::VectorXd> x,
                          Eigen::MatrixXd* jac) {
    x = a * x;
    if (jac) *jac = a;
  };
  return CocycleSystem(static_cast<int>(A.rows()), 1, std::move(kernel), std::move(name));
}

const std::vector<ModelZooEntry>& model_zoo() {
  static const std::vector<ModelZooEntry> zoo = make_zoo();
  return zoo;
}

const ModelZooEntry& zoo_entry(const std::string& name) {
  for (const auto& e : model_zoo())
    if (e.name == name) return e;
  throw std::invalid_argument("unknown model: " + name);
}

CocycleSystem build_model(const std::string& name, const ModelParams& params,
                          int steps_per_unit) {
  return zoo_entry(name).build(params, steps_per_unit);
}

}  // namespace rds
