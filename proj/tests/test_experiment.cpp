#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cmpplab/experiment.hpp"

using namespace cmpplab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json minimal_cpp() {
  return json::parse(R"({
    "schema_version": 1,
    "process": "cpp",
    "theta": 1.0,
    "claims": {"type": "degenerate", "value": 1.0},
    "horizon": 1.0,
    "grid": [0.0, 1.0],
    "n_paths": 1000,
    "master_seed": 7,
    "suites": ["wald"]
  })");
}

bool mentions(const std::vector<std::string>& violations, const std::string& needle) {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const std::string& v) { return v.find(needle) != std::string::npos; });
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("cmpplab-test-" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("validate: minimal config is clean") {
  CHECK(validate_config(minimal_cpp()).empty());
}

TEST_CASE("validate: bad gamma shape") {
  auto doc = demo_config("cmpp-gamma");
  doc["mixing"]["shape"] = -1;
  const auto v = validate_config(doc);
  CHECK(mentions(v, "mixing.shape must be > 0"));
  CHECK_THROWS_AS(parse_config(doc), ConfigError);
}

TEST_CASE("validate: lognormal claims are accepted") {
  auto doc = demo_config("cmpp-gamma");
  doc["claims"] = {{"type", "lognormal"}, {"mu", 0.0}, {"sigma", 1.0}};
  CHECK(validate_config(doc).empty());
}

TEST_CASE("validate: too few paths and grid past the horizon") {
  auto doc = minimal_cpp();
  doc["n_paths"] = 10;
  CHECK(mentions(validate_config(doc), "n_paths must be >= 1000"));

  doc = minimal_cpp();
  doc["grid"] = {0.0, 2.0};
  CHECK(mentions(validate_config(doc), "grid point 2 exceeds horizon 1"));
}

TEST_CASE("validate: reports every violation at once") {
  auto doc = minimal_cpp();
  doc["bogus"] = 1;
  doc["schema_version"] = 2;
  doc["suites"] = {"nope"};
  const auto v = validate_config(doc);
  CHECK(mentions(v, "unknown field 'bogus'"));
  CHECK(mentions(v, "schema_version must be 1"));
  CHECK(mentions(v, "unknown suite 'nope'"));
  try {
    parse_config(doc);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.violations() == v);
  }
}

TEST_CASE("validate: process specific requirements") {
  auto doc = demo_config("cmpp-gamma");
  doc.erase("mixing");
  CHECK(mentions(validate_config(doc), "mixing is required"));

  doc = demo_config("cmpp-gamma");
  doc["strata"] = "exact";
  CHECK(mentions(validate_config(doc), "strata edges are required for gamma mixing"));

  doc = demo_config("watanabe");
  doc["process"] = "cmpp";
  doc["mixing"] = {{"type", "gamma"}, {"shape", 2.0}, {"rate", 1.0}};
  CHECK(mentions(validate_config(doc), "watanabe suite requires a degenerate mixing law"));

  doc = minimal_cpp();
  doc["claim_coupling"] = "interarrival";
  CHECK_FALSE(validate_config(doc).empty());
}

TEST_CASE("every demo validates") {
  for (const auto& name : demo_names()) {
    CAPTURE(name);
    CHECK(validate_config(demo_config(name)).empty());
  }
  CHECK_THROWS_AS(demo_config("nope"), std::invalid_argument);
}

TEST_CASE("config hash ignores formatting, key order and output settings") {
  const auto a = parse_config(minimal_cpp());
  auto doc = json::parse(minimal_cpp().dump(4));
  doc["output"] = {{"dir", "somewhere-else"}};
  doc["alpha"] = 0.01;  // the default, made explicit
  const auto b = parse_config(doc);
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);

  doc["master_seed"] = 8;
  CHECK(config_hash(parse_config(doc)) != config_hash(a));
}

TEST_CASE("apply_override") {
  auto doc = demo_config("cmpp-gamma");
  apply_override(doc, "mixing.shape=3.5");
  apply_override(doc, "n_paths=2000");
  apply_override(doc, "output.dir=elsewhere");
  CHECK(doc["mixing"]["shape"] == 3.5);
  CHECK(doc["n_paths"] == 2000);
  CHECK(doc["output"]["dir"] == "elsewhere");
  CHECK_THROWS_AS(apply_override(doc, "no-equals-sign"), std::invalid_argument);
}

TEST_CASE("law JSON round trips") {
  const auto m = MixingLaw::discrete({1.0, 3.0}, {0.25, 0.75});
  CHECK(mixing_mean(mixing_law_from_json(to_json(m))) == mixing_mean(m));
  const auto c = ClaimLaw::lognormal(0.5, 0.25);
  CHECK(claim_mean(claim_law_from_json(to_json(c))) == claim_mean(c));
}

TEST_CASE("minimal run writes reports and a manifest, reproducibly") {
  const auto dir = scratch_dir("minimal");
  const auto cfg = parse_config(minimal_cpp());
  RunOptions opts;
  opts.output_dir = dir.string();
  const auto first = run_experiment(cfg, opts);
  CHECK(first.manifest.accepted);
  REQUIRE(first.manifest.suites.size() == 1);
  CHECK(first.manifest.suites[0].json_file == "reports/wald.json");
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "reports" / "wald.csv"));

  const auto manifest = json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["config_hash"] == config_hash(cfg));
  CHECK(manifest["master_seed"] == 7);

  const auto wald = json::parse(slurp(dir / "reports" / "wald.json"));
  CHECK(wald["accept"] == true);

  const auto report_bytes = slurp(dir / "reports" / "wald.json");
  const auto second = run_experiment(cfg, opts);
  CHECK(second.files == first.files);
  CHECK(slurp(dir / "reports" / "wald.json") == report_bytes);

  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    CHECK(entry.path().extension() != ".tmp");
  }
  fs::remove_all(dir);
}

TEST_CASE("thread count does not change any report") {
  auto doc = demo_config("cmpp-discrete");
  doc["n_paths"] = 20'000;
  const auto cfg = parse_config(doc);
  RunOptions one{1, std::nullopt, false};
  RunOptions four{4, std::nullopt, false};
  CHECK(run_experiment(cfg, one).files == run_experiment(cfg, four).files);
}

TEST_CASE("optional path dump") {
  auto doc = minimal_cpp();
  doc["output"] = {{"dump_paths", true}};
  const auto result = run_experiment(parse_config(doc), {1, std::nullopt, false});
  REQUIRE(result.files.count("paths.csv") == 1);
  CHECK(result.files.at("paths.csv").rfind("path_id,theta,T_n,X_n\n", 0) == 0);
}

TEST_CASE("a failing suite writes nothing") {
  const auto dir = scratch_dir("failing");
  auto doc = minimal_cpp();
  doc["theta"] = 1000.0;
  doc["max_events"] = 10;
  RunOptions opts;
  opts.output_dir = dir.string();
  CHECK_THROWS_AS(run_experiment(parse_config(doc), opts), SuiteError);
  CHECK_FALSE(fs::exists(dir / "manifest.json"));
  CHECK_FALSE(fs::exists(dir / "reports"));
}

TEST_CASE("renewal counterexample rejects the L martingale") {
  auto doc = demo_config("renewal-counterexample");
  doc["n_paths"] = 5000;
  const auto result = run_experiment(parse_config(doc), {1, std::nullopt, false});
  CHECK_FALSE(result.manifest.accepted);
  for (const auto& s : result.manifest.suites) {
    if (s.name == "martingale_L") CHECK_FALSE(s.accepted);
  }
}
