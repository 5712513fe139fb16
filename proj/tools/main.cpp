// Command-line front end: turns the library into a reproducible instrument.
// Exit codes: 0 pass, 1 numerical-acceptance failure, 2 configuration error,
// 3 runtime failure.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"

#include "rds/harness.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "run";
  uint64_t seed = 0;
  bool seed_set = false;
  int workers = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "config or manifest JSON file")->required();
  cmd->add_option("--out", args.out_dir, "output run directory (append-only)");
  cmd->add_option("--seed", args.seed, "override base.seed")->each([&args](const std::string&) {
    args.seed_set = true;
  });
  cmd->add_option("--workers", args.workers, "worker threads for fan-out stages");
}

int run_stages(const CommonArgs& args, const std::vector<std::string>& stages) {
  auto config = rds::RunConfig::from_file(args.config_path);
  rds::PipelineOptions opt;
  opt.out_dir = args.out_dir;
  opt.workers = args.workers;
  opt.stages = stages;
  if (args.seed_set) opt.seed_override = args.seed;
  const auto manifest = rds::run_pipeline(config, opt);

  for (const auto& [stage, status] : manifest.doc.at("acceptance").items())
    std::cout << stage << ": " << status.get<std::string>() << "\n";
  std::cout << "manifest: " << (fs::path(args.out_dir) / "manifest.json").string() << "\n";

  bool any_error = false, any_fail = false;
  for (const auto& [stage, status] : manifest.doc.at("acceptance").items()) {
    any_error = any_error || status == "error";
    any_fail = any_fail || status == "fail";
  }
  if (any_error) return rds::kExitRuntimeFailure;
  if (any_fail) return rds::kExitAcceptanceFailure;
  return rds::kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"random periodic curve toolkit for cylinder dynamics"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string compare_a, compare_b;

  auto* simulate = app.add_subcommand("simulate", "integrate one trajectory and dump CSV");
  add_common(simulate, args);
  auto* attractor = app.add_subcommand("attractor", "pullback approximation of K(omega)");
  add_common(attractor, args);
  auto* lyapunov = app.add_subcommand("lyapunov", "spectrum, extremal exponent, semiuniform fit");
  add_common(lyapunov, args);
  auto* curves = app.add_subcommand("curves", "extract periodic curves and winding numbers");
  add_common(curves, args);
  auto* verify = app.add_subcommand("verify", "check random periodicity and shift invariance");
  add_common(verify, args);
  auto* pipeline = app.add_subcommand("pipeline", "run configured stages in dependency order");
  add_common(pipeline, args);
  auto* compare = app.add_subcommand("compare", "diff two run manifests");
  compare->add_option("manifest_a", compare_a, "first manifest.json")->required();
  compare->add_option("manifest_b", compare_b, "second manifest.json")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return run_stages(args, {"simulate"});
    if (attractor->parsed()) return run_stages(args, {"attractor"});
    if (lyapunov->parsed()) return run_stages(args, {"attractor", "lyapunov"});
    if (curves->parsed()) return run_stages(args, {"attractor", "curves"});
    if (verify->parsed()) return run_stages(args, {"attractor", "curves", "verify"});
    if (pipeline->parsed()) return run_stages(args, {});
    if (compare->parsed()) {
      const auto a = rds::RunManifest::load(compare_a);
      const auto b = rds::RunManifest::load(compare_b);
      const auto diff = rds::compare_runs(a, b);
      std::cout << diff.dump(2) << "\n";
      return diff.at("identical").get<bool>() ? rds::kExitPass : rds::kExitAcceptanceFailure;
    }
  } catch (const rds::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return rds::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return rds::kExitRuntimeFailure;
  }
  return rds::kExitConfigError;
}
