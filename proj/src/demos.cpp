#include <algorithm>

#include "cmpplab/experiment.hpp"

namespace cmpplab {
namespace {

using json = nlohmann::json;

json base(const std::string& name) {
  return json{{"schema_version", kSchemaVersion},
              {"master_seed", 20240601},
              {"alpha", 0.01},
              {"output", {{"dir", "out-" + name}, {"dump_paths", false}}}};
}

}  // namespace

const std::vector<std::string>& demo_names() {
  static const std::vector<std::string> names = {
      "watanabe", "cmpp-gamma", "cmpp-discrete", "renewal-counterexample",
      "claims-unit-reduction"};
  return names;
}

json demo_config(const std::string& name) {
  json j = base(name);
  if (name == "watanabe") {
    // Degenerate mixing: the counting process should be Poisson(2).
    j["process"] = "cmpp";
    j["mixing"] = {{"type", "degenerate"}, {"theta", 2.0}};
    j["claims"] = {{"type", "exponential"}, {"rate", 1.0}};
    j["horizon"] = 2.0;
    j["grid"] = {0.0, 0.5, 1.0, 2.0};
    j["n_paths"] = 100000;
    j["suites"] = {"watanabe", "martingale_L", "pmf_check"};
  } else if (name == "cmpp-gamma") {
    j["process"] = "cmpp";
    j["mixing"] = {{"type", "gamma"}, {"shape", 2.0}, {"rate", 1.0}};
    j["claims"] = {{"type", "exponential"}, {"rate", 1.0}};
    j["horizon"] = 3.0;
    j["grid"] = {0.0, 0.5, 1.0, 2.0, 3.0};
    j["n_paths"] = 100000;
    j["strata"] = {1.0, 2.0, 3.5};
    j["wald_times"] = {1.0, 3.0};
    j["suites"] = {"martingale_M", "martingale_L", "stratified", "wald", "conditional_wald",
                   "pmf_check"};
  } else if (name == "cmpp-discrete") {
    j["process"] = "cmpp";
    j["mixing"] = {{"type", "discrete"}, {"atoms", {1.0, 3.0}}, {"weights", {0.5, 0.5}}};
    j["claims"] = {{"type", "exponential"}, {"rate", 1.0}};
    j["horizon"] = 2.0;
    j["grid"] = {0.0, 0.5, 1.0, 2.0};
    j["n_paths"] = 100000;
    j["strata"] = "exact";
    j["suites"] = {"martingale_M", "martingale_L", "stratified", "conditional_wald",
                   "pmf_check"};
  } else if (name == "renewal-counterexample") {
    // Evenly spaced arrivals with the Poisson(2) mean rate; N_0.75 - 1.5 = -0.5.
    j["process"] = "renewal";
    j["interarrival"] = {{"type", "degenerate"}, {"value", 0.5}};
    j["claims"] = {{"type", "degenerate"}, {"value", 1.0}};
    j["horizon"] = 2.0;
    j["grid"] = {0.0, 0.75, 1.5, 2.0};
    j["n_paths"] = 10000;
    j["suites"] = {"martingale_L", "watanabe"};
  } else if (name == "claims-unit-reduction") {
    // Unit claims: S = N and the M and L reports coincide.
    j["process"] = "cmpp";
    j["mixing"] = {{"type", "gamma"}, {"shape", 2.0}, {"rate", 1.0}};
    j["claims"] = {{"type", "degenerate"}, {"value", 1.0}};
    j["horizon"] = 2.0;
    j["grid"] = {0.0, 0.5, 1.0, 2.0};
    j["n_paths"] = 100000;
    j["suites"] = {"martingale_M", "martingale_L", "wald"};
  } else {
    std::string known;
    for (const auto& n : demo_names()) known += (known.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown demo '" + name + "'; available: " + known);
  }
  return j;
}

}  // namespace cmpplab
