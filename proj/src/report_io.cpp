#include <sstream>

#include "cmpplab/experiment.hpp"
#include "cmpplab/format.hpp"

namespace cmpplab {
namespace {

using ojson = nlohmann::ordered_json;

/// JSON has no infinities; they are written as strings.
ojson number(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

ojson record_json(const TestRecord& r) {
  return ojson{{"estimate", number(r.estimate)},
               {"stderr", number(r.std_error)},
               {"z", number(r.z)},
               {"p_value", number(r.p_value)},
               {"reject", r.reject}};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void martingale_rows(std::ostringstream& out, const MartingaleReport& report) {
  for (const auto& block : report.strata) {
    for (const auto& group : block.groups) {
      for (const auto& r : group.records) {
        out << csv_field(report.suite) << ',' << csv_field(report.series) << ','
            << csv_field(block.label) << ',' << csv_field(group.label) << ','
            << csv_field(r.label) << ',' << format_double(r.estimate) << ','
            << format_double(r.std_error) << ',' << format_double(r.z) << ','
            << format_double(r.p_value) << ',' << (r.reject ? "true" : "false") << '\n';
      }
    }
  }
}

constexpr const char* kMartingaleHeader =
    "suite,series,stratum,group,functional,estimate,stderr,z,p_value,reject\n";

}  // namespace

ojson to_json(const MartingaleReport& report) {
  ojson strata = ojson::array();
  for (const auto& block : report.strata) {
    ojson groups = ojson::object();
    ojson excluded = ojson::object();
    for (const auto& g : block.groups) {
      ojson records = ojson::object();
      for (const auto& r : g.records) records[r.label] = record_json(r);
      groups[g.label] = std::move(records);
      if (!g.excluded.empty()) excluded[g.label] = g.excluded;
    }
    strata.push_back(ojson{{"stratum", block.label},
                           {"paths", block.paths},
                           {"reject", block.reject},
                           {"pairs", std::move(groups)},
                           {"excluded_functionals", std::move(excluded)}});
  }
  return ojson{{"suite", report.suite},
               {"series", report.series},
               {"alpha", report.alpha},
               {"family_size", report.family_size},
               {"per_test_alpha", report.per_test_alpha},
               {"metadata",
                {{"paths", report.metadata.paths},
                 {"seed", report.metadata.seed},
                 {"process", report.metadata.process_kind}}},
               {"accept", !report.reject},
               {"strata", std::move(strata)},
               {"excluded_strata", report.excluded_strata}};
}

ojson to_json(const StratifiedReport& report) {
  ojson out = to_json(report.report);
  ojson checks = ojson::array();
  for (const auto& c : report.mean_checks) {
    checks.push_back(ojson{{"stratum", c.stratum},
                           {"t", c.t},
                           {"mean_count", number(c.mean_count)},
                           {"expected_count", number(c.expected_count)},
                           {"stderr", number(c.std_error)},
                           {"z", number(c.z)},
                           {"within_band", c.within_band}});
  }
  out["mean_checks"] = std::move(checks);
  return out;
}

ojson to_json(const WatanabeReport& report) {
  ojson chi = ojson::array();
  for (const auto& c : report.chi_square) {
    chi.push_back(ojson{{"t", c.t},
                        {"poisson_mean", c.rate},
                        {"statistic", number(c.statistic)},
                        {"bins", c.bins},
                        {"df", c.degrees_of_freedom},
                        {"p_value", number(c.p_value)},
                        {"reject", c.reject}});
  }
  return ojson{{"suite", "watanabe"},
               {"accept", !report.reject},
               {"martingale", to_json(report.martingale)},
               {"chi_square", std::move(chi)}};
}

ojson moment_checks_json(const std::string& suite, const std::vector<MomentCheck>& checks) {
  bool accept = true;
  ojson rows = ojson::array();
  for (const auto& c : checks) {
    accept = accept && c.within_band;
    rows.push_back(ojson{{"label", c.label},
                         {"t", c.t},
                         {"estimate", number(c.estimate)},
                         {"target", number(c.target)},
                         {"stderr", number(c.std_error)},
                         {"z", number(c.z)},
                         {"within_band", c.within_band}});
  }
  return ojson{{"suite", suite}, {"band_stderrs", kMomentBand}, {"accept", accept}, {"checks", rows}};
}

std::string to_csv(const MartingaleReport& report) {
  std::ostringstream out;
  out << kMartingaleHeader;
  martingale_rows(out, report);
  return out.str();
}

std::string to_csv(const WatanabeReport& report) {
  std::ostringstream out;
  out << kMartingaleHeader;
  martingale_rows(out, report.martingale);
  for (const auto& c : report.chi_square) {
    out << "watanabe,chi_square,all,t=" << format_double(c.t) << ",Poisson("
        << format_double(c.rate) << ")," << format_double(c.statistic) << ",,,"
        << format_double(c.p_value) << ',' << (c.reject ? "true" : "false") << '\n';
  }
  return out.str();
}

std::string moment_checks_csv(const std::string& suite, const std::vector<MomentCheck>& checks) {
  std::ostringstream out;
  out << "suite,label,t,estimate,target,stderr,z,within_band\n";
  for (const auto& c : checks) {
    out << csv_field(suite) << ',' << csv_field(c.label) << ',' << format_double(c.t) << ','
        << format_double(c.estimate) << ',' << format_double(c.target) << ','
        << format_double(c.std_error) << ',' << format_double(c.z) << ','
        << (c.within_band ? "true" : "false") << '\n';
  }
  return out.str();
}

}  // namespace cmpplab
