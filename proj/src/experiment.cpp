#include "cmpplab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cmpplab/format.hpp"

namespace cmpplab {
namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
using Violations = std::vector<std::string>;

double required_number(const json& j, const std::string& key) {
  if (!j.contains(key)) throw std::invalid_argument(key + " is required");
  const auto& v = j.at(key);
  if (!v.is_number()) throw std::invalid_argument(key + " must be a number");
  return v.get<double>();
}

std::vector<double> required_numbers(const json& j, const std::string& key) {
  if (!j.contains(key)) throw std::invalid_argument(key + " is required");
  const auto& v = j.at(key);
  if (!v.is_array()) throw std::invalid_argument(key + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw std::invalid_argument(key + " must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::string required_type(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("must be an object with a \"type\" field");
  if (!j.contains("type") || !j.at("type").is_string()) {
    throw std::invalid_argument("type is required");
  }
  return j.at("type").get<std::string>();
}

/// Runs `f`, turning std::invalid_argument into a violation prefixed by `where`.
template <class F>
auto attempt(Violations& v, const std::string& where, F&& f) -> std::optional<decltype(f())> {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    v.push_back(where.empty() ? e.what() : where + "." + e.what());
  } catch (const json::exception& e) {
    v.push_back(where + ": " + e.what());
  }
  return std::nullopt;
}

std::optional<double> optional_number(const json& doc, const std::string& key, Violations& v) {
  if (!doc.contains(key)) return std::nullopt;
  if (!doc.at(key).is_number()) {
    v.push_back(key + " must be a number");
    return std::nullopt;
  }
  return doc.at(key).get<double>();
}

std::optional<std::uint64_t> optional_unsigned(const json& doc, const std::string& key,
                                               Violations& v) {
  if (!doc.contains(key)) return std::nullopt;
  const auto& x = doc.at(key);
  if (x.is_number_unsigned()) return x.get<std::uint64_t>();
  if (x.is_number_integer() && x.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(x.get<std::int64_t>());
  }
  if (x.is_number_float()) {
    const double d = x.get<double>();
    if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
  }
  v.push_back(key + " must be a non-negative integer");
  return std::nullopt;
}

std::optional<std::vector<double>> optional_numbers(const json& doc, const std::string& key,
                                                    Violations& v) {
  if (!doc.contains(key)) return std::nullopt;
  return attempt(v, "", [&] { return required_numbers(doc, key); });
}

bool on_grid(const std::vector<double>& grid, double t) {
  return std::find(grid.begin(), grid.end(), t) != grid.end();
}

const std::set<std::string> kKnownFields = {
    "schema_version", "process",  "mixing",       "theta",        "interarrival",
    "claims",         "claim_coupling", "horizon", "grid",        "n_paths",
    "master_seed",    "alpha",    "suites",       "pairs",        "strata",
    "wald_times",     "conditional_wald_t",       "watanabe_times", "watanabe_theta",
    "pmf_t",          "pmf_n_max", "calibration_paths", "quantile_bins", "theta_blind",
    "max_events",     "output"};

std::optional<ExperimentConfig> parse_impl(const json& doc, Violations& v) {
  if (!doc.is_object()) {
    v.push_back("config must be a JSON object");
    return std::nullopt;
  }
  for (const auto& [key, _] : doc.items()) {
    if (!kKnownFields.contains(key)) v.push_back("unknown field '" + key + "'");
  }
  ExperimentConfig cfg;

  if (!doc.contains("schema_version")) {
    v.push_back("schema_version is required");
  } else if (!doc.at("schema_version").is_number_integer() ||
             doc.at("schema_version").get<int>() != kSchemaVersion) {
    v.push_back("schema_version must be " + std::to_string(kSchemaVersion));
  }

  bool kind_ok = false;
  if (!doc.contains("process") || !doc.at("process").is_string()) {
    v.push_back("process is required (cmpp, cpp or renewal)");
  } else if (auto k = attempt(v, "", [&] {
               return process_kind_from_string(doc.at("process").get<std::string>());
             })) {
    cfg.model.kind = *k;
    kind_ok = true;
  }

  if (doc.contains("claim_coupling")) {
    const auto& c = doc.at("claim_coupling");
    if (c == "independent") {
      cfg.model.coupling = ClaimCoupling::independent;
    } else if (c == "interarrival") {
      cfg.model.coupling = ClaimCoupling::interarrival;
      if (kind_ok && cfg.model.kind != ProcessKind::renewal) {
        v.push_back("claim_coupling \"interarrival\" requires process renewal");
      }
    } else {
      v.push_back("claim_coupling must be \"independent\" or \"interarrival\"");
    }
  }

  if (kind_ok) {
    switch (cfg.model.kind) {
      case ProcessKind::cmpp:
        if (!doc.contains("mixing")) {
          v.push_back("mixing is required for process cmpp");
        } else if (auto m = attempt(v, "mixing", [&] { return mixing_law_from_json(doc.at("mixing")); })) {
          cfg.model.mixing = *m;
        }
        break;
      case ProcessKind::cpp:
        if (auto th = attempt(v, "", [&] { return required_number(doc, "theta"); })) {
          if (auto m = attempt(v, "", [&] { return MixingLaw::degenerate(*th); })) cfg.model.mixing = *m;
        }
        break;
      case ProcessKind::renewal:
        if (!doc.contains("interarrival")) {
          v.push_back("interarrival is required for process renewal");
        } else if (auto w = attempt(v, "interarrival",
                                    [&] { return claim_law_from_json(doc.at("interarrival")); })) {
          cfg.model.interarrival = *w;
          cfg.model.mixing = MixingLaw::degenerate(1.0 / claim_mean(*w));
        }
        break;
    }
  }

  const bool claims_needed =
      !(cfg.model.kind == ProcessKind::renewal && cfg.model.coupling == ClaimCoupling::interarrival);
  if (doc.contains("claims")) {
    if (auto c = attempt(v, "claims", [&] { return claim_law_from_json(doc.at("claims")); })) {
      cfg.model.claims = *c;
    }
  } else if (claims_needed) {
    v.push_back("claims is required");
  }

  bool horizon_ok = false;
  if (auto h = attempt(v, "", [&] { return required_number(doc, "horizon"); })) {
    if (*h > 0.0 && std::isfinite(*h)) {
      cfg.model.horizon = *h;
      horizon_ok = true;
    } else {
      v.push_back("horizon must be > 0");
    }
  }

  bool grid_ok = false;
  if (auto g = attempt(v, "", [&] { return required_numbers(doc, "grid"); })) {
    if (attempt(v, "", [&] { return TimeGrid(*g); })) {
      cfg.grid = *g;
      grid_ok = true;
      if (horizon_ok) {
        for (double t : cfg.grid) {
          if (t > cfg.model.horizon) {
            v.push_back("grid point " + format_double(t) + " exceeds horizon " +
                        format_double(cfg.model.horizon));
            grid_ok = false;
          }
        }
      }
    }
  }

  if (!doc.contains("n_paths")) {
    v.push_back("n_paths is required");
  } else if (auto n = optional_unsigned(doc, "n_paths", v)) {
    if (*n == 0) v.push_back("n_paths must be > 0");
    cfg.n_paths = static_cast<std::size_t>(*n);
  }
  if (auto s = optional_unsigned(doc, "master_seed", v)) cfg.master_seed = *s;
  if (auto a = optional_number(doc, "alpha", v)) {
    if (!(*a > 0.0 && *a < 1.0)) v.push_back("alpha must be in (0, 1)");
    cfg.alpha = *a;
  }

  if (!doc.contains("suites") || !doc.at("suites").is_array() || doc.at("suites").empty()) {
    v.push_back("suites must be a non-empty array");
  } else {
    for (const auto& s : doc.at("suites")) {
      if (!s.is_string()) {
        v.push_back("suites must contain strings");
        continue;
      }
      const auto name = s.get<std::string>();
      const auto& known = known_suites();
      if (std::find(known.begin(), known.end(), name) == known.end()) {
        v.push_back("unknown suite '" + name + "'");
      } else if (!cfg.has_suite(name)) {
        cfg.suites.push_back(name);
      }
    }
  }
  if (!cfg.suites.empty() && cfg.n_paths > 0 && cfg.n_paths < kMinStatisticalPaths) {
    v.push_back("n_paths must be >= " + std::to_string(kMinStatisticalPaths) +
                " when statistical suites are selected");
  }
  if (!has_finite_variance(cfg.model.claims)) {
    v.push_back("claims must have finite variance for the statistical suites");
  }

  if (doc.contains("pairs")) {
    const auto& p = doc.at("pairs");
    bool ok = p.is_array();
    if (ok) {
      for (const auto& pair : p) {
        if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number()) {
          ok = false;
          break;
        }
        const double s = pair[0].get<double>();
        const double t = pair[1].get<double>();
        if (!(s < t)) v.push_back("pairs must satisfy s < t");
        if (grid_ok && (!on_grid(cfg.grid, s) || !on_grid(cfg.grid, t))) {
          v.push_back("pair (" + format_double(s) + ", " + format_double(t) + ") is not on the grid");
        }
        cfg.pairs.emplace_back(s, t);
      }
    }
    if (!ok) v.push_back("pairs must be an array of [s, t] number pairs");
  }

  if (doc.contains("strata")) {
    const auto& s = doc.at("strata");
    if (s == "exact") {
      cfg.strata = Strata{true, {}};
    } else if (auto edges = optional_numbers(doc, "strata", v)) {
      cfg.strata = Strata{false, *edges};
      for (std::size_t k = 0; k < edges->size(); ++k) {
        if (!((*edges)[k] > 0.0) || (k > 0 && !((*edges)[k] > (*edges)[k - 1]))) {
          v.push_back("strata edges must be positive and strictly increasing");
          break;
        }
      }
    }
  }
  const bool stratifies = cfg.has_suite("stratified") || cfg.has_suite("conditional_wald");
  if (stratifies && cfg.strata.exact && kind_ok && cfg.model.kind == ProcessKind::cmpp &&
      std::holds_alternative<GammaMixing>(cfg.model.mixing.variant())) {
    v.push_back("strata edges are required for gamma mixing");
  }

  if (auto w = optional_numbers(doc, "wald_times", v)) {
    cfg.wald_times = *w;
  } else if (grid_ok) {
    cfg.wald_times = cfg.grid;
  }
  for (double t : cfg.wald_times) {
    if (!(t >= 0.0) || (horizon_ok && t > cfg.model.horizon)) {
      v.push_back("wald time " + format_double(t) + " outside [0, horizon]");
    }
  }

  if (auto c = optional_number(doc, "conditional_wald_t", v)) {
    cfg.conditional_wald_t = *c;
    if (grid_ok && !on_grid(cfg.grid, *c)) v.push_back("conditional_wald_t must be a grid point");
  } else if (grid_ok) {
    cfg.conditional_wald_t = cfg.grid.back();
  }

  if (auto w = optional_numbers(doc, "watanabe_times", v)) {
    cfg.watanabe_times = *w;
    for (double t : *w) {
      if (!(t > 0.0) || (grid_ok && !on_grid(cfg.grid, t))) {
        v.push_back("watanabe time " + format_double(t) + " must be a positive grid point");
      }
    }
  } else if (grid_ok) {
    for (double t : cfg.grid) {
      if (t > 0.0) cfg.watanabe_times.push_back(t);
    }
  }
  if (cfg.has_suite("watanabe") && kind_ok && cfg.model.kind == ProcessKind::cmpp &&
      !cfg.model.mixing.is_degenerate()) {
    v.push_back("watanabe suite requires a degenerate mixing law");
  }
  cfg.watanabe_theta = mixing_mean(cfg.model.mixing);
  if (auto w = optional_number(doc, "watanabe_theta", v)) {
    if (!(*w > 0.0)) v.push_back("watanabe_theta must be > 0");
    cfg.watanabe_theta = *w;
  }

  cfg.pmf_t = horizon_ok ? std::min(1.0, cfg.model.horizon) : 1.0;
  if (auto t = optional_number(doc, "pmf_t", v)) {
    if (!(*t >= 0.0) || (horizon_ok && *t > cfg.model.horizon)) {
      v.push_back("pmf_t must be within [0, horizon]");
    }
    cfg.pmf_t = *t;
  }
  if (auto n = optional_unsigned(doc, "pmf_n_max", v)) cfg.pmf_n_max = static_cast<long long>(*n);

  if (auto c = optional_unsigned(doc, "calibration_paths", v)) {
    if (*c < kMinStratumPaths) v.push_back("calibration_paths must be >= 100");
    cfg.calibration_paths = static_cast<std::size_t>(*c);
  }
  if (auto q = optional_unsigned(doc, "quantile_bins", v)) {
    if (*q < 2) v.push_back("quantile_bins must be >= 2");
    cfg.quantile_bins = static_cast<std::size_t>(*q);
  }
  if (doc.contains("theta_blind")) {
    if (doc.at("theta_blind").is_boolean()) {
      cfg.theta_blind = doc.at("theta_blind").get<bool>();
    } else {
      v.push_back("theta_blind must be a boolean");
    }
  }
  if (auto m = optional_unsigned(doc, "max_events", v)) {
    if (*m == 0) v.push_back("max_events must be > 0");
    cfg.max_events = static_cast<std::size_t>(*m);
  }

  if (doc.contains("output")) {
    const auto& o = doc.at("output");
    if (!o.is_object()) {
      v.push_back("output must be an object");
    } else {
      if (o.contains("dir")) {
        if (o.at("dir").is_string()) {
          cfg.output_dir = o.at("dir").get<std::string>();
        } else {
          v.push_back("output.dir must be a string");
        }
      }
      if (o.contains("dump_paths")) {
        if (o.at("dump_paths").is_boolean()) {
          cfg.dump_paths = o.at("dump_paths").get<bool>();
        } else {
          v.push_back("output.dump_paths must be a boolean");
        }
      }
    }
  }

  if (!v.empty()) return std::nullopt;
  return cfg;
}

std::size_t grid_index(const TimeGrid& grid, double t) {
  const std::size_t i = grid.index_of(t);
  if (i == grid.size()) throw std::invalid_argument(format_double(t) + " is not a grid point");
  return i;
}

void write_atomically(const std::filesystem::path& target, const std::string& content) {
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

}  // namespace

const std::vector<std::string>& known_suites() {
  static const std::vector<std::string> suites = {
      "martingale_M", "martingale_L", "stratified", "wald", "conditional_wald", "watanabe",
      "pmf_check"};
  return suites;
}

bool ExperimentConfig::has_suite(const std::string& name) const {
  return std::find(suites.begin(), suites.end(), name) != suites.end();
}

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error(violations.empty() ? "invalid config"
                                            : "invalid config: " + violations.front()),
      violations_(std::move(violations)) {}

MixingLaw mixing_law_from_json(const json& j) {
  const std::string type = required_type(j);
  if (type == "degenerate") return MixingLaw::degenerate(required_number(j, "theta"));
  if (type == "gamma") {
    const double shape = required_number(j, "shape");
    return MixingLaw::gamma(shape, required_number(j, "rate"));
  }
  if (type == "discrete") {
    return MixingLaw::discrete(required_numbers(j, "atoms"), required_numbers(j, "weights"));
  }
  throw std::invalid_argument("type must be one of degenerate, gamma, discrete");
}

ClaimLaw claim_law_from_json(const json& j) {
  const std::string type = required_type(j);
  if (type == "degenerate") return ClaimLaw::degenerate(required_number(j, "value"));
  if (type == "exponential") return ClaimLaw::exponential(required_number(j, "rate"));
  if (type == "lognormal") {
    return ClaimLaw::lognormal(required_number(j, "mu"), required_number(j, "sigma"));
  }
  if (type == "discrete") {
    return ClaimLaw::discrete(required_numbers(j, "atoms"), required_numbers(j, "weights"));
  }
  throw std::invalid_argument("type must be one of degenerate, exponential, lognormal, discrete");
}

json to_json(const MixingLaw& law) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, DegenerateMixing>) {
          return {{"type", "degenerate"}, {"theta", v.theta0}};
        } else if constexpr (std::is_same_v<T, GammaMixing>) {
          return {{"type", "gamma"}, {"shape", v.shape}, {"rate", v.rate}};
        } else {
          return {{"type", "discrete"}, {"atoms", v.atoms}, {"weights", v.weights}};
        }
      },
      law.variant());
}

json to_json(const ClaimLaw& law) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, DegenerateClaim>) {
          return {{"type", "degenerate"}, {"value", v.x0}};
        } else if constexpr (std::is_same_v<T, ExponentialClaim>) {
          return {{"type", "exponential"}, {"rate", v.rate}};
        } else if constexpr (std::is_same_v<T, LogNormalClaim>) {
          return {{"type", "lognormal"}, {"mu", v.mu}, {"sigma", v.sigma}};
        } else {
          return {{"type", "discrete"}, {"atoms", v.atoms}, {"weights", v.weights}};
        }
      },
      law.variant());
}

std::vector<std::string> validate_config(const json& doc) {
  Violations v;
  parse_impl(doc, v);
  return v;
}

ExperimentConfig parse_config(const json& doc) {
  Violations v;
  auto cfg = parse_impl(doc, v);
  if (!cfg) throw ConfigError(std::move(v));
  return *cfg;
}

json canonical_config(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["process"] = to_string(c.model.kind);
  switch (c.model.kind) {
    case ProcessKind::cmpp: j["mixing"] = to_json(c.model.mixing); break;
    case ProcessKind::cpp: j["theta"] = mixing_mean(c.model.mixing); break;
    case ProcessKind::renewal:
      j["interarrival"] = to_json(c.model.interarrival);
      j["claim_coupling"] =
          c.model.coupling == ClaimCoupling::interarrival ? "interarrival" : "independent";
      break;
  }
  if (!(c.model.kind == ProcessKind::renewal && c.model.coupling == ClaimCoupling::interarrival)) {
    j["claims"] = to_json(c.model.claims);
  }
  j["horizon"] = c.model.horizon;
  j["grid"] = c.grid;
  j["n_paths"] = c.n_paths;
  j["master_seed"] = c.master_seed;
  j["alpha"] = c.alpha;
  j["suites"] = c.suites;
  json pairs = json::array();
  for (const auto& [s, t] : c.pairs) pairs.push_back({s, t});
  j["pairs"] = pairs;
  j["strata"] = c.strata.exact ? json("exact") : json(c.strata.edges);
  j["wald_times"] = c.wald_times;
  j["conditional_wald_t"] = c.conditional_wald_t;
  j["watanabe_times"] = c.watanabe_times;
  j["watanabe_theta"] = c.watanabe_theta;
  j["pmf_t"] = c.pmf_t;
  j["pmf_n_max"] = c.pmf_n_max;
  j["calibration_paths"] = c.calibration_paths;
  j["quantile_bins"] = c.quantile_bins;
  j["theta_blind"] = c.theta_blind;
  j["max_events"] = c.max_events;
  return j;
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = canonical_config(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::invalid_argument("override '" + assignment + "' must look like key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw std::invalid_argument("override key '" + key + "' is malformed");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

ojson to_json(const RunManifest& m) {
  ojson suites = ojson::array();
  for (const auto& s : m.suites) {
    suites.push_back(ojson{{"name", s.name},
                           {"accept", s.accepted},
                           {"report_json", s.json_file},
                           {"report_csv", s.csv_file}});
  }
  return ojson{{"schema_version", kSchemaVersion},
               {"config_hash", m.config_hash},
               {"master_seed", m.master_seed},
               {"n_paths", m.n_paths},
               {"process", m.process},
               {"accept", m.accepted},
               {"suites", suites},
               {"wall_clock_seconds", m.wall_clock_seconds},
               {"software_version", m.software_version}};
}

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const unsigned threads = options.threads;
  const SimulationLimits limits{config.max_events};
  const TimeGrid grid(config.grid);
  const auto& model = config.model;

  RunResult result;
  auto& manifest = result.manifest;
  manifest.config_hash = config_hash(config);
  manifest.master_seed = config.master_seed;
  manifest.n_paths = config.n_paths;
  manifest.process = to_string(model.kind);
  manifest.software_version = CMPPLAB_VERSION;

  std::vector<RiskPath> paths;
  CompensatedEnsemble ensemble;
  try {
    paths = simulate_ensemble(model, config.n_paths, StreamFactory(config.master_seed, 0), threads,
                              limits);
    ensemble = compensate_ensemble(paths, grid, model.claim_mean(), threads);
  } catch (const std::exception& e) {
    throw SuiteError(std::string("simulation: ") + e.what());
  }

  // Functional families and event sets are fixed on a separate ensemble so
  // that bin edges never depend on the data being tested.
  const bool needs_calibration =
      config.has_suite("martingale_M") || config.has_suite("martingale_L") ||
      config.has_suite("stratified") || config.has_suite("watanabe") ||
      config.has_suite("conditional_wald");
  std::vector<TestCase> cases;
  CompensatedEnsemble calibration;
  if (needs_calibration) {
    try {
      const auto calib_paths = simulate_ensemble(
          model, config.calibration_paths, StreamFactory(config.master_seed, 1), threads, limits);
      calibration = compensate_ensemble(calib_paths, grid, model.claim_mean(), threads);
      std::vector<std::pair<std::size_t, std::size_t>> pairs;
      if (config.pairs.empty()) {
        pairs = all_pairs(grid);
      } else {
        for (const auto& [s, t] : config.pairs) pairs.emplace_back(grid_index(grid, s), grid_index(grid, t));
      }
      cases = build_test_cases(calibration, pairs, {config.quantile_bins, config.theta_blind});
    } catch (const std::exception& e) {
      throw SuiteError(std::string("calibration: ") + e.what());
    }
  }

  auto stamp = [&](MartingaleReport& r) {
    r.metadata.seed = config.master_seed;
    r.metadata.process_kind = to_string(model.kind);
  };
  auto add = [&](const std::string& name, bool accepted, const ojson& j, std::string csv) {
    SuiteOutcome outcome{name, accepted, "reports/" + name + ".json", "reports/" + name + ".csv"};
    result.files[outcome.json_file] = dump(j);
    result.files[outcome.csv_file] = std::move(csv);
    manifest.suites.push_back(outcome);
    manifest.accepted = manifest.accepted && accepted;
  };

  for (const auto& suite : config.suites) {
    try {
      if (suite == "martingale_M" || suite == "martingale_L") {
        const Series series = suite == "martingale_M" ? Series::M : Series::L;
        auto report = martingale_test(ensemble, series, cases, config.alpha, threads);
        stamp(report);
        add(suite, report.accepted(), to_json(report), to_csv(report));
      } else if (suite == "stratified") {
        for (Series series : {Series::M, Series::L}) {
          auto report = stratified_martingale_test(ensemble, series, cases, config.alpha,
                                                   config.strata, threads);
          stamp(report.report);
          add("stratified_" + to_string(series), report.report.accepted(), to_json(report),
              to_csv(report.report));
        }
      } else if (suite == "wald") {
        std::vector<MomentCheck> checks;
        for (double t : config.wald_times) {
          checks.push_back(wald_check(paths, t, mixing_mean(model.mixing), model.claim_mean(), threads));
        }
        const auto j = moment_checks_json(suite, checks);
        add(suite, j["accept"].get<bool>(), j, moment_checks_csv(suite, checks));
      } else if (suite == "conditional_wald") {
        const std::size_t t_index = grid_index(grid, config.conditional_wald_t);
        const auto sets = build_event_sets(calibration, t_index, config.quantile_bins);
        auto report = conditional_wald_check(ensemble, t_index, sets, config.strata, config.alpha,
                                             threads);
        stamp(report);
        add(suite, report.accepted(), to_json(report), to_csv(report));
      } else if (suite == "watanabe") {
        std::vector<std::size_t> times;
        for (double t : config.watanabe_times) times.push_back(grid_index(grid, t));
        auto report = watanabe_check(ensemble, cases, times, config.watanabe_theta, config.alpha,
                                     threads);
        stamp(report.martingale);
        add(suite, !report.reject, to_json(report), to_csv(report));
      } else if (suite == "pmf_check") {
        const auto checks = pmf_check(paths, model.mixing, config.pmf_t, config.pmf_n_max, threads);
        const auto j = moment_checks_json(suite, checks);
        add(suite, j["accept"].get<bool>(), j, moment_checks_csv(suite, checks));
      }
    } catch (const std::exception& e) {
      throw SuiteError("suite '" + suite + "': " + e.what());
    }
  }

  if (config.dump_paths) {
    std::ostringstream out;
    write_paths_csv(out, paths);
    result.files["paths.csv"] = out.str();
  }

  manifest.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (options.write) {
    namespace fs = std::filesystem;
    const fs::path dir = options.output_dir.value_or(config.output_dir);
    fs::create_directories(dir / "reports");
    for (const auto& [name, content] : result.files) write_atomically(dir / name, content);
    write_atomically(dir / "manifest.json", dump(to_json(manifest)));
  }
  return result;
}

}  // namespace cmpplab
