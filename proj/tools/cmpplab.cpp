// cmpplab: command-line front end for compound mixed Poisson experiments.
//
//   cmpplab run CONFIG [key=value ...]   exit 0 accept, 2 reject, 1 error
//   cmpplab validate CONFIG
//   cmpplab demo NAME
//   cmpplab pmf --mixing JSON --t T --n-max N

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include <CLI11.hpp>

#include "cmpplab/experiment.hpp"
#include "cmpplab/format.hpp"

namespace {

using nlohmann::json;

constexpr int kExitAccept = 0;
constexpr int kExitError = 1;
constexpr int kExitReject = 2;

json read_config(const std::string& path) {
  std::string text;
  if (path == "-") {
    text.assign(std::istreambuf_iterator<char>(std::cin), {});
  } else {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config '" + path + "'");
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw std::runtime_error("config '" + path + "' is not valid JSON");
  return doc;
}

void print_violations(const std::vector<std::string>& violations) {
  for (const auto& v : violations) std::cerr << "violation: " << v << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and martingale test laboratory for compound mixed Poisson processes"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::optional<double> alpha;
  std::optional<std::string> out_dir;
  unsigned threads = 0;

  auto* run = app.add_subcommand("run", "Run an experiment and write its reports");
  run->add_option("config,--config", config_path, "Config file, or - for standard input");
  run->add_option("overrides", overrides, "key=value overrides applied to the config");
  run->add_option("--seed", seed, "Master seed");
  run->add_option("--paths", paths, "Number of simulated paths");
  run->add_option("--alpha", alpha, "Family-wise test level");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--threads", threads, "Worker threads (0 = hardware)")->envname("CMPPLAB_THREADS");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a config and list violations");
  validate->add_option("config,--config", validate_path, "Config file, or - for standard input");

  std::string demo_name;
  auto* demo = app.add_subcommand("demo", "Print a built-in demo config");
  demo->add_option("name", demo_name, "Demo name")->required();

  std::string mixing_spec;
  double pmf_t = 0.0;
  long long n_max = 0;
  auto* pmf = app.add_subcommand("pmf", "Print the mixed Poisson pmf as CSV");
  pmf->add_option("--mixing", mixing_spec, "Mixing law as JSON, e.g. {\"type\":\"gamma\",\"shape\":2,\"rate\":1}")
      ->required();
  pmf->add_option("--t", pmf_t, "Time")->required();
  pmf->add_option("--n-max", n_max, "Largest count")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  try {
    if (*run) {
      if (config_path.empty()) throw std::runtime_error("run needs a config path (or -)");
      json doc = read_config(config_path);
      for (const auto& o : overrides) cmpplab::apply_override(doc, o);
      if (seed) doc["master_seed"] = *seed;
      if (paths) doc["n_paths"] = *paths;
      if (alpha) doc["alpha"] = *alpha;
      const auto violations = cmpplab::validate_config(doc);
      if (!violations.empty()) {
        print_violations(violations);
        return kExitError;
      }
      const auto config = cmpplab::parse_config(doc);
      cmpplab::RunOptions options;
      options.threads = threads;
      options.output_dir = out_dir;
      const auto result = cmpplab::run_experiment(config, options);
      for (const auto& s : result.manifest.suites) {
        std::cout << (s.accepted ? "accept " : "reject ") << s.name << '\n';
      }
      std::cout << "manifest: " << (out_dir.value_or(config.output_dir)) << "/manifest.json\n";
      return result.manifest.accepted ? kExitAccept : kExitReject;
    }
    if (*validate) {
      if (validate_path.empty()) throw std::runtime_error("validate needs a config path (or -)");
      const auto violations = cmpplab::validate_config(read_config(validate_path));
      if (violations.empty()) {
        std::cout << "ok\n";
        return kExitAccept;
      }
      print_violations(violations);
      return kExitError;
    }
    if (*demo) {
      std::cout << cmpplab::demo_config(demo_name).dump(2) << '\n';
      return kExitAccept;
    }
    if (*pmf) {
      const json spec = json::parse(mixing_spec, nullptr, false);
      if (spec.is_discarded()) throw std::runtime_error("--mixing is not valid JSON");
      const auto law = cmpplab::mixing_law_from_json(spec);
      if (n_max < 0) throw std::invalid_argument("--n-max must be >= 0");
      std::ostringstream out;
      out << "n,pmf\n";
      double total = 0.0;
      for (long long n = 0; n <= n_max; ++n) {
        const double p = cmpplab::mixed_poisson_pmf(law, pmf_t, n);
        total += p;
        out << n << ',' << cmpplab::format_double(p) << '\n';
      }
      out << "# tail_mass," << cmpplab::format_double(std::max(0.0, 1.0 - total)) << '\n';
      std::cout << out.str();
      return kExitAccept;
    }
  } catch (const cmpplab::ConfigError& e) {
    print_violations(e.violations());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return kExitError;
}
