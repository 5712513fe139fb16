#include "rds/harness.hpp"

#include <cinttypes>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>

extern char** environ;

namespace rds {

namespace {

using nlohmann::json;

constexpr const char* kConfigSchema = "rds-config/1";
constexpr const char* kManifestSchema = "rds-manifest/1";
constexpr const char* kCoreVersion = "1.0.0";

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string iso_now() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

void require_type(const json& node, const std::string& key, json::value_t type,
                  const char* type_name) {
  require(node.contains(key), "missing config key: " + key);
  const auto& v = node.at(key);
  const bool numeric_ok = type == json::value_t::number_float && v.is_number();
  require(v.type() == type || numeric_ok, "config key " + key + " must be of type " + type_name);
}

void fill_default(json& node, const std::string& key, json value) {
  if (!node.contains(key)) node[key] = std::move(value);
}

}  // namespace

void apply_env_overrides(json& tree) {
  for (char** env = environ; *env != nullptr; ++env) {
    std::string entry(*env);
    if (entry.rfind("RDS_", 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string key = entry.substr(4, eq - 4);
    const std::string value = entry.substr(eq + 1);
    for (auto& ch : key) ch = static_cast<char>(std::tolower(ch));

    json* node = &tree;
    size_t pos = 0;
    while (true) {
      const auto sep = key.find("__", pos);
      const std::string part = key.substr(pos, sep == std::string::npos ? sep : sep - pos);
      if (sep == std::string::npos) {
        json parsed;
        try {
          parsed = json::parse(value);
        } catch (const json::parse_error&) {
          parsed = value;
        }
        (*node)[part] = parsed;
        break;
      }
      node = &(*node)[part];
      pos = sep + 2;
    }
  }
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config file: " + path.string());
  json tree;
  try {
    in >> tree;
  } catch (const json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  apply_env_overrides(tree);
  return from_json(std::move(tree));
}

RunConfig RunConfig::from_json(json tree) {
  require(tree.is_object(), "config root must be a JSON object");
  if (tree.value("schema", "") == kManifestSchema) {
    require(tree.contains("config"), "manifest has no embedded config to replay");
    tree = tree.at("config");
  }
  RunConfig cfg;
  cfg.tree_ = std::move(tree);
  cfg.validate_and_fill();
  return cfg;
}

void RunConfig::validate_and_fill() {
  require(tree_.value("schema", "") == kConfigSchema,
          std::string("config schema must be \"") + kConfigSchema + "\"");

  static const std::vector<std::string> known = {
      "schema",   "model",       "base",  "engine", "simulate", "attractor", "covering",
      "cardinality", "lyapunov", "certificate", "curves", "verify", "kb", "pipeline"};
  for (const auto& [key, value] : tree_.items()) {
    require(std::find(known.begin(), known.end(), key) != known.end(),
            "unknown config key: " + key);
  }

  require_type(tree_, "model", json::value_t::object, "object");
  require_type(tree_["model"], "name", json::value_t::string, "string");
  fill_default(tree_["model"], "params", json::object());
  require(tree_["model"]["params"].is_object(), "model.params must be an object");
  zoo_entry(model_name());  // rejects unknown models early

  fill_default(tree_, "base", json::object());
  auto& base = tree_["base"];
  fill_default(base, "kind", "wiener");
  fill_default(base, "seed", 1);
  fill_default(base, "grid_step", 1.0 / 512.0);
  fill_default(base, "dimension", 1);
  fill_default(base, "alpha", 0.0);
  require(base["seed"].is_number_unsigned() || base["seed"].is_number_integer(),
          "config key base.seed must be of type integer");
  require_type(base, "grid_step", json::value_t::number_float, "number");
  const double gs = base["grid_step"].get<double>();
  require(gs > 0.0, "base.grid_step must be positive");
  const int64_t spu = std::llround(1.0 / gs);
  require(spu >= 1 && std::abs(1.0 / gs - static_cast<double>(spu)) < 1e-9,
          "base.grid_step must be the inverse of an integer step count per unit time");

  fill_default(tree_, "engine", json::object());
  fill_default(tree_["engine"], "escape_radius", 1e6);

  fill_default(tree_, "simulate", json::object());
  auto& sim = tree_["simulate"];
  fill_default(sim, "t", 10.0);
  fill_default(sim, "s0", 0.0);
  fill_default(sim, "x0", json::array({0.5}));
  fill_default(sim, "stride", 8);

  fill_default(tree_, "attractor", json::object());
  auto& att = tree_["attractor"];
  fill_default(att, "box_min", json::array({-2.0}));
  fill_default(att, "box_max", json::array({2.0}));
  fill_default(att, "grid", 8);
  fill_default(att, "horizon", 50.0);
  fill_default(att, "bins", 256);
  fill_default(att, "tol_k", 0.0);
  require(att["box_min"].is_array() && att["box_max"].is_array(),
          "attractor.box_min/box_max must be arrays");
  require(att["box_min"].size() == att["box_max"].size(),
          "attractor.box_min/box_max must have equal length");

  fill_default(tree_, "covering", json::object());
  fill_default(tree_["covering"], "epsilon", 0.05);

  fill_default(tree_, "cardinality", json::object());
  fill_default(tree_["cardinality"], "gap_threshold", 0.0);

  fill_default(tree_, "lyapunov", json::object());
  auto& lya = tree_["lyapunov"];
  fill_default(lya, "n_steps", 100000);
  fill_default(lya, "qr_stride", 10);
  fill_default(lya, "paths", 8);
  fill_default(lya, "s0", 0.0);
  fill_default(lya, "x0", json::array({0.5}));
  fill_default(lya, "n_grid", json::array({16, 32, 64, 128, 256, 512, 1024}));
  fill_default(lya, "lambda_prime", nullptr);
  fill_default(lya, "lambda", nullptr);
  fill_default(lya, "shifts", json::array({0, 4, 16, 64}));
  fill_default(lya, "records_paths", 4);
  fill_default(lya, "fibre_points", 2);
  fill_default(lya, "fibre_bin_stride", 16);
  fill_default(lya, "extremal_paths", 8);

  if (tree_.contains("certificate")) {
    auto& cert = tree_["certificate"];
    fill_default(cert, "radius", 0.1);
    fill_default(cert, "c", 2.0);
    fill_default(cert, "delta", 0.9);
    fill_default(cert, "k_max", 256);
    fill_default(cert, "samples_per_bin", 50);
    fill_default(cert, "bin_stride", 16);
    fill_default(cert, "sample_seed", 7);
  }

  fill_default(tree_, "curves", json::object());
  auto& cur = tree_["curves"];
  fill_default(cur, "strips", 8);
  fill_default(cur, "jump_threshold", 0.0);
  fill_default(cur, "cluster_cut", 0.0);
  fill_default(cur, "tol_match", 0.0);
  fill_default(cur, "tol_curve", 0.0);

  fill_default(tree_, "verify", json::object());
  auto& ver = tree_["verify"];
  fill_default(ver, "k", 1);
  fill_default(ver, "shifts", 4);
  fill_default(ver, "tol_period", 0.0);
  fill_default(ver, "search_min_k", false);

  fill_default(tree_, "kb", json::object());
  fill_default(tree_["kb"], "horizon", 0);
  fill_default(tree_["kb"], "samples", 16);

  fill_default(tree_, "pipeline", json::object());
  fill_default(tree_["pipeline"], "stages",
               json::array({"attractor", "lyapunov", "curves", "verify"}));
  for (const auto& st : tree_["pipeline"]["stages"]) {
    static const std::vector<std::string> stages = {"simulate", "attractor", "lyapunov", "curves",
                                                    "verify"};
    require(st.is_string() && std::find(stages.begin(), stages.end(),
                                        st.get<std::string>()) != stages.end(),
            "pipeline.stages entries must be one of simulate/attractor/lyapunov/curves/verify");
  }
}

ModelParams RunConfig::model_params() const {
  ModelParams params;
  for (const auto& [k, v] : tree_.at("model").at("params").items()) {
    require(v.is_number(), "model.params." + k + " must be a number");
    params[k] = v.get<double>();
  }
  return params;
}

int RunConfig::steps_per_unit() const {
  return static_cast<int>(std::llround(1.0 / tree_.at("base").at("grid_step").get<double>()));
}

CocycleSystem RunConfig::build_system() const {
  CocycleSystem sys = build_model(model_name(), model_params(), steps_per_unit());
  sys.set_escape_radius(tree_.at("engine").at("escape_radius").get<double>());
  return sys;
}

NoisePath RunConfig::base_path() const {
  const auto& base = tree_.at("base");
  return NoisePath(base.at("seed").get<uint64_t>(), base.at("grid_step").get<double>(),
                   base.at("dimension").get<int>());
}

std::string manifest_hash(const json& resolved_config) {
  const std::string dump = resolved_config.dump();
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open manifest: " + path.string());
  RunManifest m;
  in >> m.doc;
  require(m.doc.value("schema", "") == kManifestSchema, "not a run manifest: " + path.string());
  return m;
}

bool RunManifest::completed() const {
  for (const auto& [stage, status] : doc.at("acceptance").items())
    if (status != "pass") return false;
  return true;
}

namespace {

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& file, const std::string& schema,
            const std::string& hash, const std::string& columns)
      : out_(file) {
    if (!out_.good()) throw std::runtime_error("cannot write " + file.string());
    out_ << "# schema " << schema << "\n# manifest " << hash << "\n" << columns << "\n";
  }
  void row(const std::vector<double>& values, const std::vector<int64_t>& ints = {}) {
    bool first = true;
    for (double v : values) {
      out_ << (first ? "" : ",") << fmt_double(v);
      first = false;
    }
    for (int64_t v : ints) {
      out_ << (first ? "" : ",") << v;
      first = false;
    }
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Eigen::VectorXd json_to_vector(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) v(i) = arr[i].get<double>();
  return v;
}

// Shared state between pipeline stages, filled lazily in dependency order.
struct StageContext {
  const RunConfig* cfg = nullptr;
  std::filesystem::path out_dir;
  std::string hash;
  int workers = 1;
  std::optional<CocycleSystem> sys;
  std::map<int, FibreCloud> clouds;           // key: pullback base shift in periods
  std::map<int, PeriodicCurveSet> curve_sets;
  json results = json::object();
  std::vector<std::string> outputs;

  const CocycleSystem& system() {
    if (!sys) sys = cfg->build_system();
    return *sys;
  }

  NoisePath omega_at(int periods_back) {
    return cfg->base_path().shifted_slots(-static_cast<int64_t>(periods_back) *
                                          system().steps_per_unit());
  }

  const FibreCloud& cloud_at(int periods_back) {
    auto it = clouds.find(periods_back);
    if (it != clouds.end()) return it->second;
    const auto& att = cfg->tree().at("attractor");
    PullbackParams p;
    p.box_min = json_to_vector(att.at("box_min"));
    p.box_max = json_to_vector(att.at("box_max"));
    p.grid_per_axis = att.at("grid").get<int>();
    p.horizon = att.at("horizon").get<double>();
    p.bins = att.at("bins").get<int>();
    p.tol_k = att.at("tol_k").get<double>();
    p.workers = workers;
    auto cloud = pullback_attractor(system(), omega_at(periods_back), p);
    return clouds.emplace(periods_back, std::move(cloud)).first->second;
  }

  ExtractionParams extraction_params() const {
    const auto& c = cfg->tree().at("curves");
    ExtractionParams p;
    p.strips = c.at("strips").get<int>();
    p.jump_threshold = c.at("jump_threshold").get<double>();
    p.cluster_cut = c.at("cluster_cut").get<double>();
    p.tol_match = c.at("tol_match").get<double>();
    p.tol_curve = c.at("tol_curve").get<double>();
    return p;
  }

  const PeriodicCurveSet& curves_at(int periods_back) {
    auto it = curve_sets.find(periods_back);
    if (it != curve_sets.end()) return it->second;
    auto set = extract_periodic_curves(cloud_at(periods_back), extraction_params());
    return curve_sets.emplace(periods_back, std::move(set)).first->second;
  }
};

bool stage_simulate(StageContext& ctx) {
  const auto& sim = ctx.cfg->tree().at("simulate");
  const CylinderState z0(sim.at("s0").get<double>(), json_to_vector(sim.at("x0")));
  const auto file = ctx.out_dir / "trajectory.csv";
  write_trajectory(ctx.system(), ctx.cfg->base_path(), z0, sim.at("t").get<double>(),
                   sim.at("stride").get<int>(), file, ctx.hash);
  ctx.outputs.push_back("trajectory.csv");
  ctx.results["simulate"] = {{"t", sim.at("t")}, {"file", "trajectory.csv"}};
  return true;
}

bool stage_attractor(StageContext& ctx) {
  const auto& cloud = ctx.cloud_at(0);
  json res;
  res["accepted"] = cloud.accepted;
  res["convergence_gap"] = cloud.convergence_gap;
  res["tol_k"] = cloud.tol_k;
  res["bins"] = cloud.bins;
  res["horizon"] = cloud.pullback_horizon;
  res["points"] = cloud.total_points();

  // cluster ids for the CSV; the cut may be refused on unconverged clouds
  double gap = ctx.cfg->tree().at("cardinality").at("gap_threshold").get<double>();
  if (gap <= 0.0) gap = resolve_scales(cloud, ctx.extraction_params()).cluster_cut;
  CardinalityReport card;
  bool have_card = true;
  try {
    card = fibre_cardinality(cloud, gap);
  } catch (const std::invalid_argument& e) {
    have_card = false;
    res["cardinality_warning"] = e.what();
  }
  if (have_card) {
    res["cardinality"] = {{"n", card.n},
                          {"min_separation", card.min_separation},
                          {"gap_threshold", gap},
                          {"flagged_bins", card.flagged_bins.size()}};
  }

  const double eps = ctx.cfg->tree().at("covering").at("epsilon").get<double>();
  if (eps > 0.0) {
    const auto prof = covering_number(cloud, eps);
    res["covering"] = {{"epsilon", eps},
                       {"max_upper", prof.max_upper},
                       {"candidate_n", prof.candidate_n},
                       {"empty_bins", prof.empty_bins.size()}};
  }

  const int kb_horizon = ctx.cfg->tree().at("kb").at("horizon").get<int>();
  if (kb_horizon > 0) {
    const auto& att = ctx.cfg->tree().at("attractor");
    const Eigen::VectorXd lo = json_to_vector(att.at("box_min"));
    const Eigen::VectorXd hi = json_to_vector(att.at("box_max"));
    const int samples = ctx.cfg->tree().at("kb").at("samples").get<int>();
    std::vector<CylinderState> nu0;
    for (int i = 0; i < samples; ++i) {
      const double frac = samples == 1 ? 0.5 : static_cast<double>(i) / (samples - 1);
      const int bin = (i * cloud.bins / samples) % cloud.bins;
      nu0.emplace_back(cloud.bin_s(bin), lo + frac * (hi - lo));
    }
    const auto mu = krylov_bogolyubov(ctx.system(), ctx.cfg->base_path(), nu0, kb_horizon);
    json kb = {{"horizon", kb_horizon}, {"samples", samples}};
    const auto& entry = zoo_entry(ctx.cfg->model_name());
    if (entry.facts.curve) {
      int winding = 1;
      for (int w : entry.facts.windings) winding = std::max(winding, w);
      kb["mean_distance_to_curve"] = measure_mean_distance(mu, entry.facts.curve, winding);
    }
    res["kb"] = kb;
  }

  // cloud.csv: s_bin, x1..xd, cluster_id
  {
    CsvWriter csv(ctx.out_dir / "cloud.csv", "rds-cloud/1", ctx.hash,
                  [&] {
                    std::string cols = "s_bin";
                    for (int j = 0; j < ctx.system().dimension(); ++j)
                      cols += ",x" + std::to_string(j + 1);
                    return cols + ",cluster_id";
                  }());
    for (int b = 0; b < cloud.bins; ++b) {
      for (size_t i = 0; i < cloud.points[b].size(); ++i) {
        std::vector<double> row{cloud.bin_s(b)};
        for (int j = 0; j < cloud.points[b][i].size(); ++j) row.push_back(cloud.points[b][i](j));
        const int64_t cl = have_card ? card.labels[b][i] : -1;
        csv.row(row, {cl});
      }
    }
    ctx.outputs.push_back("cloud.csv");
  }
  {
    json meta = {{"schema", "rds-cloud-meta/1"}, {"manifest", ctx.hash},
                 {"seed", cloud.seed},          {"shift_slots", cloud.shift_slots},
                 {"horizon", cloud.pullback_horizon}, {"bin_width", cloud.bin_width},
                 {"tol_k", cloud.tol_k},        {"accepted", cloud.accepted},
                 {"convergence_gap", cloud.convergence_gap}};
    std::ofstream out(ctx.out_dir / "cloud.json");
    out << meta.dump(2) << "\n";
    ctx.outputs.push_back("cloud.json");
  }

  ctx.results["attractor"] = res;
  return cloud.accepted;
}

bool stage_lyapunov(StageContext& ctx) {
  const auto& lya = ctx.cfg->tree().at("lyapunov");
  const auto& sys = ctx.system();
  const uint64_t seed = ctx.cfg->seed();
  const int paths = lya.at("paths").get<int>();
  const int noise_dim = ctx.cfg->tree().at("base").at("dimension").get<int>();

  std::vector<NoisePath> ensemble;
  json seed_set = json::array();
  for (int i = 0; i < paths; ++i) {
    ensemble.emplace_back(seed + static_cast<uint64_t>(i), sys.grid_step(), noise_dim);
    seed_set.push_back(seed + static_cast<uint64_t>(i));
  }
  const CylinderState z0(lya.at("s0").get<double>(), json_to_vector(lya.at("x0")));
  const auto est = estimate_spectrum_ensemble(sys, ensemble, z0, lya.at("n_steps").get<int64_t>(),
                                              lya.at("qr_stride").get<int>());

  json report;
  report["schema"] = "rds-lyapunov/1";
  report["manifest"] = ctx.hash;
  report["model"] = ctx.cfg->model_name();
  report["seed_set"] = seed_set;
  report["exponents"] = vector_to_json(est.exponents);
  report["stderr"] = vector_to_json(est.standard_error);
  report["degenerate_warning"] = est.degenerate_warning;

  bool pass = true;

  std::vector<int> n_grid;
  for (const auto& n : lya.at("n_grid")) n_grid.push_back(n.get<int>());

  ExtremalParams ep;
  ep.n_grid = n_grid;
  ep.path_count = lya.at("extremal_paths").get<int>();
  ep.path_seed_base = seed + 1000;
  ep.points_per_fibre = lya.at("fibre_points").get<int>();
  ep.bin_stride = lya.at("fibre_bin_stride").get<int>();
  const auto extremal = extremal_exponent(sys, ctx.cloud_at(0), ep);
  report["extremal"] = extremal.value;
  report["extremal_per_n"] = extremal.per_n;
  report["extremal_non_monotone_n"] = extremal.non_monotone_n;

  json semi = json::object();
  if (!lya.at("lambda_prime").is_null()) {
    const double lambda_prime = lya.at("lambda_prime").get<double>();
    std::vector<int> shifts;
    for (const auto& s : lya.at("shifts")) shifts.push_back(s.get<int>());
    const auto states = sample_fibre_states(ctx.cloud_at(0), ep.points_per_fibre, ep.bin_stride);
    const auto groups =
        collect_subadditive_records(sys, seed + 2000, lya.at("records_paths").get<int>(), shifts,
                                    states, n_grid, ctx.workers);
    const double lambda = lya.at("lambda").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                     : lya.at("lambda").get<double>();
    const auto rep = fit_adjusted_variable(groups, lambda_prime, lambda);
    semi["lambda_prime"] = rep.lambda_prime;
    semi["lambda"] = rep.lambda;
    semi["adjusted_ok"] = rep.adjusted_ok;
    semi["shift_slope"] = rep.shift_slope;
    json viols = json::array();
    for (const auto& v : rep.violations) {
      viols.push_back({{"seed", v.seed},
                       {"shift_slots", v.shift_slots},
                       {"n", v.n},
                       {"value", v.value},
                       {"bound", v.bound},
                       {"s", v.state.s}});
    }
    semi["violations"] = viols;
    json cs = json::object();
    for (const auto& f : rep.fits)
      cs[std::to_string(f.seed) + "@" + std::to_string(f.shift_slots)] = f.C;
    semi["C_estimates"] = cs;
    // a loose (vacuous) bound passes trivially; note it
    if (lambda_prime >= 0.0 && extremal.value < 0.0) semi["vacuous_bound"] = true;
    pass = pass && rep.pass();
  }
  report["semiuniform"] = semi;

  if (ctx.cfg->tree().contains("certificate")) {
    const auto& cj = ctx.cfg->tree().at("certificate");
    CertificateParams cp;
    cp.radius = cj.at("radius").get<double>();
    cp.c = cj.at("c").get<double>();
    cp.delta = cj.at("delta").get<double>();
    cp.samples_per_bin = cj.at("samples_per_bin").get<int>();
    cp.bin_stride = cj.at("bin_stride").get<int>();
    cp.sample_seed = cj.at("sample_seed").get<uint64_t>();
    cp.workers = ctx.workers;
    cp.k_grid.clear();
    for (int k = 1; k <= cj.at("k_max").get<int>(); k *= 2) cp.k_grid.push_back(k);
    const auto cert = contraction_certificate(sys, ctx.cloud_at(0), cp);
    json cjson = {{"pass", cert.pass},
                  {"worst_margin", cert.worst_margin},
                  {"samples", cert.samples},
                  {"blowups", cert.blowups}};
    if (cert.first_fail_k) cjson["first_fail_k"] = *cert.first_fail_k;
    report["certificate"] = cjson;
    pass = pass && cert.pass;
  }

  std::ofstream out(ctx.out_dir / "lyapunov.json");
  out << report.dump(2) << "\n";
  ctx.outputs.push_back("lyapunov.json");
  ctx.results["lyapunov"] = report;
  return pass;
}

bool stage_curves(StageContext& ctx) {
  const auto& set = ctx.curves_at(0);
  const auto scales = resolve_scales(ctx.cloud_at(0), ctx.extraction_params());

  CsvWriter csv(ctx.out_dir / "curves.csv", "rds-curves/1", ctx.hash, [&] {
    std::string cols = "curve_id,s_lift";
    for (int j = 0; j < ctx.system().dimension(); ++j) cols += ",x" + std::to_string(j + 1);
    return cols;
  }());
  for (size_t ci = 0; ci < set.curves.size(); ++ci) {
    const auto& c = set.curves[ci];
    for (size_t i = 0; i < c.samples.size(); ++i) {
      std::vector<double> row{static_cast<double>(ci), static_cast<double>(i) * set.bin_width};
      for (int j = 0; j < c.samples[i].size(); ++j) row.push_back(c.samples[i](j));
      csv.row(row);
    }
  }
  ctx.outputs.push_back("curves.csv");

  json res;
  res["n"] = set.curves.size();
  res["periods"] = set.period_multiset();
  res["permutation"] = set.permutation;
  res["winding_sum"] = [&] {
    int s = 0;
    for (const auto& c : set.curves) s += c.period;
    return s;
  }();
  res["scales"] = {{"jump_threshold", scales.jump_threshold},
                   {"cluster_cut", scales.cluster_cut},
                   {"tol_match", scales.tol_match},
                   {"tol_curve", scales.tol_curve}};
  ctx.results["curves"] = res;
  return true;
}

bool stage_verify(StageContext& ctx) {
  const auto& ver = ctx.cfg->tree().at("verify");
  const int k = ver.at("k").get<int>();
  double tol = ver.at("tol_period").get<double>();
  if (tol <= 0.0) tol = 5.0 * ctx.cloud_at(0).tol_k;

  const auto& cur = ctx.curves_at(0);
  const auto& prev = ctx.curves_at(k);
  const auto rep = verify_random_periodicity(ctx.system(), cur, prev, k, tol);

  json res;
  res["schema"] = "rds-verify/1";
  res["manifest"] = ctx.hash;
  res["n"] = cur.curves.size();
  res["periods"] = cur.period_multiset();
  res["residuals"] = rep.residuals;
  res["tol_period"] = tol;
  res["k"] = k;
  res["pass"] = rep.pass;
  if (!rep.failure.empty()) res["failure"] = rep.failure;

  bool pass = rep.pass;

  const int shifts = ver.at("shifts").get<int>();
  int mismatches = 0;
  for (int j = 1; j <= shifts; ++j) {
    const auto inv = verify_period_shift_invariance(cur, ctx.curves_at(j));
    if (!inv.pass) ++mismatches;
  }
  res["shift_checks"] = shifts;
  res["shift_mismatches"] = mismatches;
  pass = pass && mismatches == 0;

  if (ver.at("search_min_k").get<bool>()) {
    // smallest grid-aligned passing k; tolerance-dependent by construction
    std::optional<int> min_k;
    for (int kk = 1; kk <= std::max(k, 8); ++kk) {
      const auto r = verify_random_periodicity(ctx.system(), cur, ctx.curves_at(kk), kk, tol);
      if (r.pass) {
        min_k = kk;
        break;
      }
    }
    if (min_k) res["min_passing_k"] = *min_k;
    res["min_passing_k_note"] = "tolerance-dependent; smallest grid-aligned k only";
  }

  std::ofstream out(ctx.out_dir / "verify.json");
  out << res.dump(2) << "\n";
  ctx.outputs.push_back("verify.json");
  ctx.results["verify"] = res;
  return pass;
}

}  // namespace

void write_trajectory(const CocycleSystem& sys, const NoisePath& omega, const CylinderState& z0,
                      double t, int stride, const std::filesystem::path& file,
                      const std::string& hash) {
  CsvWriter csv(file, "rds-trajectory/1", hash, [&] {
    std::string cols = "t,s";
    for (int j = 0; j < sys.dimension(); ++j) cols += ",x" + std::to_string(j + 1);
    return cols;
  }());
  const int64_t steps = sys.align_steps(t);
  CocycleEvolver ev(sys, omega, z0);
  for (int64_t i = 0; i <= steps; ++i) {
    if (i % std::max(1, stride) == 0) {
      std::vector<double> row{static_cast<double>(i) * sys.grid_step(), ev.s()};
      for (int j = 0; j < ev.x().size(); ++j) row.push_back(ev.x()(j));
      csv.row(row);
    }
    if (i < steps) ev.step(nullptr);
  }
}

RunManifest run_pipeline(const RunConfig& config_in, const PipelineOptions& options) {
  RunConfig config = config_in;
  if (options.seed_override) config.override_seed(*options.seed_override);

  namespace fs = std::filesystem;
  fs::create_directories(options.out_dir);
  if (fs::exists(options.out_dir / "manifest.json"))
    throw ConfigError("run directory already holds a manifest (run directories are append-only): " +
                      options.out_dir.string());

  StageContext ctx;
  ctx.cfg = &config;
  ctx.out_dir = options.out_dir;
  ctx.workers = std::max(1, options.workers);
  ctx.hash = manifest_hash(config.tree());

  RunManifest manifest;
  manifest.doc["schema"] = kManifestSchema;
  manifest.doc["manifest_hash"] = ctx.hash;
  manifest.doc["config"] = config.tree();
  manifest.doc["module_versions"] = {{"rds_core", kCoreVersion},
                                     {"rds-cloud", "1"},
                                     {"rds-curves", "1"},
                                     {"rds-lyapunov", "1"},
                                     {"rds-trajectory", "1"},
                                     {"rds-verify", "1"}};
  manifest.doc["timestamps"] = {{"start", iso_now()}};

  std::vector<std::string> stages = options.stages;
  if (stages.empty())
    for (const auto& s : config.tree().at("pipeline").at("stages"))
      stages.push_back(s.get<std::string>());

  // dependency order
  static const std::vector<std::string> order = {"simulate", "attractor", "lyapunov", "curves",
                                                 "verify"};
  std::vector<std::string> ordered;
  for (const auto& st : order)
    if (std::find(stages.begin(), stages.end(), st) != stages.end()) ordered.push_back(st);

  json acceptance = json::object();
  bool halted = false;
  for (const auto& stage : ordered) {
    if (halted) {
      acceptance[stage] = "skipped";
      continue;
    }
    try {
      bool ok = false;
      if (stage == "simulate") ok = stage_simulate(ctx);
      if (stage == "attractor") ok = stage_attractor(ctx);
      if (stage == "lyapunov") ok = stage_lyapunov(ctx);
      if (stage == "curves") ok = stage_curves(ctx);
      if (stage == "verify") ok = stage_verify(ctx);
      acceptance[stage] = ok ? "pass" : "fail";
      if (!ok) halted = true;
    } catch (const ExtractionError& e) {
      acceptance[stage] = "fail";
      ctx.results[stage]["failure"] = e.what();
      halted = true;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      acceptance[stage] = "error";
      ctx.results[stage]["error"] = e.what();
      halted = true;
    }
  }

  json seed_set = json::array({config.seed()});
  manifest.doc["seed_set"] = seed_set;
  manifest.doc["acceptance"] = acceptance;
  manifest.doc["results"] = ctx.results;
  json outs = json::array();
  for (const auto& f : ctx.outputs)
    outs.push_back({{"file", f}, {"bytes", fs::file_size(options.out_dir / f)}});
  manifest.doc["outputs"] = outs;
  manifest.doc["timestamps"]["end"] = iso_now();

  std::ofstream out(options.out_dir / "manifest.json");
  out << manifest.doc.dump(2) << "\n";
  return manifest;
}

nlohmann::json compare_runs(const RunManifest& a, const RunManifest& b) {
  const auto& ca = a.doc.at("config");
  const auto& cb = b.doc.at("config");

  json diff;
  diff["schema"] = "rds-compare/1";
  diff["model"] = {{"a", ca.at("model").at("name")}, {"b", cb.at("model").at("name")}};
  json diffs = json::array();
  if (ca.at("model").at("name") != cb.at("model").at("name"))
    diffs.push_back({{"field", "model"},
                     {"a", ca.at("model").at("name")},
                     {"b", cb.at("model").at("name")}});

  if (a.doc.at("acceptance") != b.doc.at("acceptance"))
    diffs.push_back({{"field", "acceptance"},
                     {"a", a.doc.at("acceptance")},
                     {"b", b.doc.at("acceptance")}});

  const auto& ra = a.doc.at("results");
  const auto& rb = b.doc.at("results");
  if (ra.contains("curves") && rb.contains("curves")) {
    const auto pa = ra.at("curves").at("periods");
    const auto pb = rb.at("curves").at("periods");
    diff["periods"] = {{"a", pa}, {"b", pb}, {"equal", pa == pb}};
    if (pa != pb) diffs.push_back({{"field", "periods"}, {"a", pa}, {"b", pb}});
  }
  if (ra.contains("lyapunov") && rb.contains("lyapunov")) {
    const auto ea = ra.at("lyapunov").at("exponents");
    const auto eb = rb.at("lyapunov").at("exponents");
    const auto sa = ra.at("lyapunov").at("stderr");
    const auto sb = rb.at("lyapunov").at("stderr");
    if (ea.size() != eb.size())
      throw ConfigError("compare_runs: incompatible models (state dimensions differ)");
    bool consistent = true;
    {
      for (size_t i = 0; i < ea.size(); ++i) {
        const double se = std::sqrt(sa[i].get<double>() * sa[i].get<double>() +
                                    sb[i].get<double>() * sb[i].get<double>());
        if (std::abs(ea[i].get<double>() - eb[i].get<double>()) > 2.0 * se + 1e-12)
          consistent = false;
      }
    }
    diff["exponents"] = {{"a", ea}, {"b", eb}, {"consistent", consistent}};
    if (!consistent) diffs.push_back({{"field", "exponents"}, {"a", ea}, {"b", eb}});
  }

  diff["diffs"] = diffs;
  diff["identical"] =
      diffs.empty() && a.doc.at("results") == b.doc.at("results");
  return diff;
}

}  // namespace rds
