#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "rds/curves.hpp"
#include "rds/invariant.hpp"
#include "rds/lyapunov.hpp"
#include "rds/zoo.hpp"

namespace rds {

/// Exit codes shared by the library surface and the CLI.
enum ExitCode : int {
  kExitPass = 0,
  kExitAcceptanceFailure = 1,
  kExitConfigError = 2,
  kExitRuntimeFailure = 3,
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Validated run configuration. The tree keeps the full resolved key-value
/// structure (defaults materialized) so manifests list every tolerance used.
class RunConfig {
 public:
  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig from_json(nlohmann::json tree);

  const nlohmann::json& tree() const { return tree_; }
  nlohmann::json& tree() { return tree_; }

  std::string model_name() const { return tree_.at("model").at("name"); }
  ModelParams model_params() const;
  uint64_t seed() const { return tree_.at("base").at("seed").get<uint64_t>(); }
  void override_seed(uint64_t seed) { tree_["base"]["seed"] = seed; }
  int steps_per_unit() const;

  CocycleSystem build_system() const;
  NoisePath base_path() const;

 private:
  void validate_and_fill();
  nlohmann::json tree_;
};

/// Applies RDS_* environment overrides to a config tree; '__' in the variable
/// name separates key-path segments (RDS_BASE__SEED -> base.seed).
void apply_env_overrides(nlohmann::json& tree);

struct RunManifest {
  nlohmann::json doc;

  static RunManifest load(const std::filesystem::path& path);
  std::string hash() const { return doc.at("manifest_hash"); }
  bool completed() const;
};

/// FNV-1a hash of the canonical config dump; stamped into every output file.
std::string manifest_hash(const nlohmann::json& resolved_config);

struct PipelineOptions {
  std::filesystem::path out_dir;
  int workers = 1;
  std::optional<uint64_t> seed_override;
  std::vector<std::string> stages;  // empty -> config's pipeline.stages
};

/// Runs the configured stages in dependency order, writing outputs and the
/// manifest into a fresh run directory. A numerical acceptance failure marks
/// the stage and halts downstream stages; the manifest records partial
/// completion. Accepts either a config or a prior manifest (replay).
RunManifest run_pipeline(const RunConfig& config, const PipelineOptions& options);

/// Structural diff of two completed runs: acceptance summaries, period
/// multisets, exponent estimates with combined error bars.
nlohmann::json compare_runs(const RunManifest& a, const RunManifest& b);

/// Writes one trajectory as CSV (t, s, x1..xd); the simulate stage.
void write_trajectory(const CocycleSystem& sys, const NoisePath& omega, const CylinderState& z0,
                      double t, int stride, const std::filesystem::path& file,
                      const std::string& hash);

}  // namespace rds
