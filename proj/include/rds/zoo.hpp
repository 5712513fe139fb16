#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rds/sde.hpp"

namespace rds {

/// Analytic facts a test model is known to satisfy, each tagged with how the
/// fact was obtained so reports can cite it.
struct ZooFacts {
  std::optional<double> top_exponent;                 // per unit time
  std::optional<int> fibre_count;                     // n
  std::vector<int> windings;                          // tau multiset
  std::function<double(double s_lift)> curve;         // branch value at lift s (d = 1)
  std::map<std::string, std::string> provenance;      // fact -> how it is known
};

using ModelParams = std::map<std::string, double>;

struct ModelZooEntry {
  std::string name;
  std::string summary;
  ModelParams defaults;
  bool is_sde = true;  // false for closed-form step maps
  std::function<CocycleSystem(const ModelParams&, int steps_per_unit)> build;
  ZooFacts facts;
};

/// The registry of test systems with known behaviour.
const std::vector<ModelZooEntry>& model_zoo();

const ModelZooEntry& zoo_entry(const std::string& name);

/// Builds a registered model; params override entry defaults key-by-key.
CocycleSystem build_model(const std::string& name, const ModelParams& params = {},
                          int steps_per_unit = 512);

/// SdeSpec factories for the SDE-backed entries (used where a spec, not a
/// built system, is needed).
SdeSpec forced_contraction_spec(double sigma, int steps_per_unit);
SdeSpec linear_multiplicative_spec(double a, double sigma, int steps_per_unit,
                                   bool ito_euler = false);
SdeSpec double_well_spec(double eps, double sigma, int steps_per_unit);

/// The invariant curve of the forced linear contraction.
double forced_contraction_curve(double s);

/// A one-step-per-unit map system x -> A x (constant Jacobian A).
CocycleSystem make_linear_map_system(const Eigen::MatrixXd& A, std::string name);

}  // namespace rds
