#include "cmpplab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "cmpplab/format.hpp"
#include "cmpplab/parallel.hpp"

namespace cmpplab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const std::vector<double>& values_of(const CompensatedSeries& s, Series series) {
  return series == Series::M ? s.m_values : s.l_values;
}

std::string pair_label(const TimeGrid& grid, std::size_t s, std::size_t t) {
  return "s=" + format_double(grid[s]) + ",t=" + format_double(grid[t]);
}

/// Accumulators for a flat list of statistics, plus whether each functional
/// was ever non-zero.
struct BatteryAcc {
  std::vector<MomentAccumulator> moments;
  std::vector<char> hit;

  void ensure(std::size_t n) {
    if (moments.size() < n) {
      moments.resize(n);
      hit.resize(n, 0);
    }
  }
  void merge(const BatteryAcc& other) {
    ensure(other.moments.size());
    for (std::size_t i = 0; i < other.moments.size(); ++i) {
      moments[i].merge(other.moments[i]);
      hit[i] = static_cast<char>(hit[i] | other.hit[i]);
    }
  }
};

std::size_t total_functionals(std::span<const TestCase> cases) {
  std::size_t n = 0;
  for (const auto& c : cases) n += c.functionals.size();
  return n;
}

/// Accumulates (Z_t - Z_s) g over the selected series. `members` empty means
/// the whole ensemble.
BatteryAcc run_battery(const CompensatedEnsemble& ensemble, std::span<const std::size_t> members,
                       Series series, std::span<const TestCase> cases, unsigned threads) {
  const std::size_t width = total_functionals(cases);
  const bool all = members.empty();
  const std::size_t n = all ? ensemble.series.size() : members.size();
  auto acc = chunked_reduce<BatteryAcc>(n, threads, [&](BatteryAcc& a, std::size_t i) {
    a.ensure(width);
    const auto& s = ensemble.series[all ? i : members[i]];
    const auto& z = values_of(s, series);
    std::size_t slot = 0;
    for (const auto& c : cases) {
      const double increment = z[c.t_index] - z[c.s_index];
      for (const auto& f : c.functionals) {
        const double g = f.evaluate(s, c.s_index);
        if (g != 0.0) a.hit[slot] = 1;
        a.moments[slot].add(increment * g);
        ++slot;
      }
    }
  });
  acc.ensure(width);
  return acc;
}

/// Turns accumulated statistics into groups; decisions are filled in later
/// once the family size is known.
std::vector<TestGroup> battery_groups(const TimeGrid& grid, std::span<const TestCase> cases,
                                      const BatteryAcc& acc, std::size_t& family_size) {
  std::vector<TestGroup> groups;
  std::size_t slot = 0;
  for (const auto& c : cases) {
    TestGroup group;
    group.label = pair_label(grid, c.s_index, c.t_index);
    for (const auto& f : c.functionals) {
      if (acc.hit[slot]) {
        group.records.push_back(z_test(f.label(), acc.moments[slot]));
        ++family_size;
      } else {
        group.excluded.push_back(f.label());
      }
      ++slot;
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

void decide(MartingaleReport& report) {
  report.per_test_alpha =
      report.family_size == 0 ? report.alpha : report.alpha / static_cast<double>(report.family_size);
  report.reject = false;
  for (auto& block : report.strata) {
    block.reject = false;
    for (auto& group : block.groups) {
      for (auto& r : group.records) {
        r.reject = r.p_value < report.per_test_alpha;
        block.reject = block.reject || r.reject;
      }
    }
    report.reject = report.reject || block.reject;
  }
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0, 1)");
}

void check_cases(const CompensatedEnsemble& ensemble, std::span<const TestCase> cases) {
  for (const auto& c : cases) {
    if (!(c.s_index < c.t_index) || c.t_index >= ensemble.grid.size()) {
      throw std::invalid_argument("test pairs must satisfy s < t on the grid");
    }
  }
}

std::vector<double> quantile_edges(std::vector<double> values, std::size_t bins) {
  std::vector<double> edges;
  if (values.empty() || bins < 2) return edges;
  std::sort(values.begin(), values.end());
  const double lowest = values.front();
  for (std::size_t k = 1; k < bins; ++k) {
    const double e = values[(k * values.size()) / bins];
    if (e > lowest && (edges.empty() || e > edges.back())) edges.push_back(e);
  }
  return edges;
}

void add_bins(std::vector<FunctionalSpec>& out, Variable v, const std::vector<double>& edges) {
  if (edges.empty()) return;
  double lo = -kInf;
  for (double e : edges) {
    out.push_back(FunctionalSpec::bin(v, lo, e));
    lo = e;
  }
  out.push_back(FunctionalSpec::bin(v, lo, kInf));
}

bool is_constant(const std::vector<double>& v) {
  return v.empty() || std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

std::string variable_symbol(Variable v, const std::string& time) {
  switch (v) {
    case Variable::count: return "N_" + time;
    case Variable::aggregate: return "S_" + time;
    case Variable::theta: return "theta";
  }
  return "?";
}

std::string functional_label(const FunctionalSpec& f, const std::string& time) {
  if (f.kind == FunctionalKind::polynomial) {
    if (f.degree == 0) return "1";
    const std::string sym = variable_symbol(f.variable, time);
    return f.degree == 1 ? sym : sym + "^" + std::to_string(f.degree);
  }
  return variable_symbol(f.variable, time) + " in [" + format_double(f.lo) + "," +
         format_double(f.hi) + ")";
}

double finite_z(double mean, double se) {
  if (se > 0.0) return mean / se;
  if (mean == 0.0) return 0.0;
  return std::copysign(kInf, mean);
}

}  // namespace

std::string to_string(Series series) { return series == Series::M ? "M" : "L"; }

CompensatedSeries compensate(const RiskPath& path, const TimeGrid& grid, double claim_mean) {
  if (!(claim_mean > 0.0)) throw std::invalid_argument("claim_mean must be > 0");
  if (grid.back() > path.horizon()) {
    throw std::invalid_argument("grid extends beyond the path horizon");
  }
  CompensatedSeries out;
  out.theta = path.theta();
  const std::size_t n = grid.size();
  out.counts.reserve(n);
  out.aggregates.reserve(n);
  out.m_values.reserve(n);
  out.l_values.reserve(n);
  for (double t : grid.points()) {
    const double count = static_cast<double>(count_at(path, t));
    const double aggregate = aggregate_at(path, t);
    out.counts.push_back(count);
    out.aggregates.push_back(aggregate);
    out.m_values.push_back(aggregate - t * path.theta() * claim_mean);
    out.l_values.push_back(count - t * path.theta());
  }
  return out;
}

CompensatedEnsemble compensate_ensemble(std::span<const RiskPath> paths, const TimeGrid& grid,
                                        double claim_mean, unsigned threads) {
  CompensatedEnsemble out{grid, claim_mean, std::vector<CompensatedSeries>(paths.size())};
  for_each_chunk(paths.size(), threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out.series[i] = compensate(paths[i], grid, claim_mean);
    }
  });
  return out;
}

FunctionalSpec FunctionalSpec::constant() { return {FunctionalKind::polynomial, Variable::count, 0, 0, 0}; }

FunctionalSpec FunctionalSpec::bin(Variable v, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("bin requires lo < hi");
  return {FunctionalKind::indicator_bin, v, lo, hi, 0};
}

FunctionalSpec FunctionalSpec::power(Variable v, int degree) {
  if (degree < 0 || degree > 2) throw std::invalid_argument("polynomial degree must be 0, 1 or 2");
  return {FunctionalKind::polynomial, v, 0, 0, degree};
}

double FunctionalSpec::evaluate(const CompensatedSeries& series, std::size_t s_index) const {
  if (kind == FunctionalKind::polynomial && degree == 0) return 1.0;
  double v = 0.0;
  switch (variable) {
    case Variable::count: v = series.counts[s_index]; break;
    case Variable::aggregate: v = series.aggregates[s_index]; break;
    case Variable::theta: v = series.theta; break;
  }
  if (kind == FunctionalKind::indicator_bin) return (v >= lo && v < hi) ? 1.0 : 0.0;
  return degree == 1 ? v : v * v;
}

bool FunctionalSpec::uses_theta() const noexcept {
  return variable == Variable::theta && !(kind == FunctionalKind::polynomial && degree == 0);
}

std::string FunctionalSpec::label() const { return functional_label(*this, "s"); }

std::vector<std::pair<std::size_t, std::size_t>> all_pairs(const TimeGrid& grid) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t s = 0; s < grid.size(); ++s) {
    for (std::size_t t = s + 1; t < grid.size(); ++t) pairs.emplace_back(s, t);
  }
  return pairs;
}

std::vector<TestCase> build_test_cases(const CompensatedEnsemble& calibration,
                                       std::span<const std::pair<std::size_t, std::size_t>> pairs,
                                       const FamilyOptions& options) {
  std::vector<TestCase> cases;
  std::vector<double> thetas;
  thetas.reserve(calibration.series.size());
  for (const auto& s : calibration.series) thetas.push_back(s.theta);
  const bool theta_varies = !options.theta_blind && !is_constant(thetas);
  const auto theta_edges = theta_varies ? quantile_edges(thetas, options.quantile_bins)
                                        : std::vector<double>{};

  for (const auto& [s, t] : pairs) {
    if (!(s < t) || t >= calibration.grid.size()) {
      throw std::invalid_argument("test pairs must satisfy s < t on the grid");
    }
    TestCase c{s, t, {FunctionalSpec::constant()}};
    for (Variable v : {Variable::count, Variable::aggregate}) {
      std::vector<double> values;
      values.reserve(calibration.series.size());
      for (const auto& series : calibration.series) {
        values.push_back(v == Variable::count ? series.counts[s] : series.aggregates[s]);
      }
      if (is_constant(values)) continue;
      add_bins(c.functionals, v, quantile_edges(values, options.quantile_bins));
      c.functionals.push_back(FunctionalSpec::power(v, 1));
    }
    if (theta_varies) {
      add_bins(c.functionals, Variable::theta, theta_edges);
      c.functionals.push_back(FunctionalSpec::power(Variable::theta, 1));
      c.functionals.push_back(FunctionalSpec::power(Variable::theta, 2));
    }
    cases.push_back(std::move(c));
  }
  return cases;
}

TestRecord z_test(std::string label, const MomentAccumulator& acc) {
  TestRecord r;
  r.label = std::move(label);
  r.estimate = acc.mean();
  r.std_error = acc.standard_error();
  r.z = finite_z(r.estimate, r.std_error);
  r.p_value = std::erfc(std::abs(r.z) / std::numbers::sqrt2);
  return r;
}

MartingaleReport martingale_test(const CompensatedEnsemble& ensemble, Series series,
                                 std::span<const TestCase> cases, double alpha, unsigned threads,
                                 std::size_t min_paths) {
  check_alpha(alpha);
  check_cases(ensemble, cases);
  if (ensemble.series.size() < min_paths) {
    throw std::invalid_argument("martingale test needs at least " + std::to_string(min_paths) +
                                " paths");
  }
  MartingaleReport report;
  report.suite = "martingale";
  report.series = to_string(series);
  report.alpha = alpha;
  report.metadata.paths = ensemble.series.size();

  const auto acc = run_battery(ensemble, {}, series, cases, threads);
  StratumBlock block;
  block.label = "all";
  block.paths = ensemble.series.size();
  block.groups = battery_groups(ensemble.grid, cases, acc, report.family_size);
  report.strata.push_back(std::move(block));
  decide(report);
  return report;
}

StratumSplit split_strata(const CompensatedEnsemble& ensemble, const Strata& strata) {
  StratumSplit out;
  if (strata.exact) {
    std::map<double, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < ensemble.series.size(); ++i) {
      groups[ensemble.series[i].theta].push_back(i);
    }
    for (auto& [theta, members] : groups) {
      out.labels.push_back("theta=" + format_double(theta));
      out.members.push_back(std::move(members));
    }
    return out;
  }
  for (std::size_t k = 1; k < strata.edges.size(); ++k) {
    if (!(strata.edges[k] > strata.edges[k - 1])) {
      throw std::invalid_argument("strata edges must be strictly increasing");
    }
  }
  const std::size_t n_bins = strata.edges.size() + 1;
  out.members.resize(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    const double lo = b == 0 ? -kInf : strata.edges[b - 1];
    const double hi = b == n_bins - 1 ? kInf : strata.edges[b];
    out.labels.push_back("theta in [" + format_double(lo) + "," + format_double(hi) + ")");
  }
  for (std::size_t i = 0; i < ensemble.series.size(); ++i) {
    const double theta = ensemble.series[i].theta;
    const auto bin = static_cast<std::size_t>(
        std::upper_bound(strata.edges.begin(), strata.edges.end(), theta) - strata.edges.begin());
    out.members[bin].push_back(i);
  }
  return out;
}

StratifiedReport stratified_martingale_test(const CompensatedEnsemble& ensemble, Series series,
                                            std::span<const TestCase> cases, double alpha,
                                            const Strata& strata, unsigned threads) {
  check_alpha(alpha);
  check_cases(ensemble, cases);
  StratifiedReport out;
  auto& report = out.report;
  report.suite = "stratified_martingale";
  report.series = to_string(series);
  report.alpha = alpha;
  report.metadata.paths = ensemble.series.size();

  const auto split = split_strata(ensemble, strata);
  for (std::size_t k = 0; k < split.labels.size(); ++k) {
    const auto& members = split.members[k];
    if (members.size() < kMinStratumPaths) {
      report.excluded_strata.push_back(split.labels[k] + " (" + std::to_string(members.size()) +
                                       " paths)");
      continue;
    }
    const auto acc = run_battery(ensemble, members, series, cases, threads);
    StratumBlock block;
    block.label = split.labels[k];
    block.paths = members.size();
    block.groups = battery_groups(ensemble.grid, cases, acc, report.family_size);
    report.strata.push_back(std::move(block));

    MomentAccumulator theta_acc;
    for (std::size_t i : members) theta_acc.add(ensemble.series[i].theta);
    for (std::size_t g = 1; g < ensemble.grid.size(); ++g) {
      MomentAccumulator counts, compensated;
      for (std::size_t i : members) {
        counts.add(ensemble.series[i].counts[g]);
        compensated.add(ensemble.series[i].l_values[g]);
      }
      StratumMeanCheck check;
      check.stratum = split.labels[k];
      check.t = ensemble.grid[g];
      check.mean_count = counts.mean();
      check.expected_count = check.t * theta_acc.mean();
      check.std_error = compensated.standard_error();
      check.z = finite_z(compensated.mean(), check.std_error);
      check.within_band = std::abs(check.z) <= kMomentBand;
      out.mean_checks.push_back(check);
    }
  }
  decide(report);
  return out;
}

MomentCheck wald_check(std::span<const RiskPath> paths, double t, double mixing_mean,
                       double claim_mean, unsigned threads) {
  if (paths.empty()) throw std::invalid_argument("wald check needs paths");
  const auto acc = chunked_reduce<MomentAccumulator>(
      paths.size(), threads, [&](MomentAccumulator& a, std::size_t i) {
        a.add(aggregate_at(paths[i], t));
      });
  MomentCheck check;
  check.label = "E[S_t]";
  check.t = t;
  check.estimate = acc.mean();
  check.target = t * mixing_mean * claim_mean;
  check.std_error = acc.standard_error();
  check.z = finite_z(check.estimate - check.target, check.std_error);
  check.within_band = std::abs(check.z) <= kMomentBand;
  return check;
}

std::string EventSpec::label() const {
  if (indicator.kind == FunctionalKind::polynomial && indicator.degree == 0) return "Omega";
  return functional_label(indicator, "u");
}

std::vector<EventSpec> build_event_sets(const CompensatedEnsemble& calibration,
                                        std::size_t t_index, std::size_t quantile_bins) {
  if (t_index >= calibration.grid.size()) throw std::invalid_argument("t not on the grid");
  std::vector<EventSpec> sets{{0, FunctionalSpec::constant()}};
  for (std::size_t u = 1; u <= t_index; ++u) {
    std::vector<double> counts;
    counts.reserve(calibration.series.size());
    for (const auto& s : calibration.series) counts.push_back(s.counts[u]);
    if (is_constant(counts)) continue;
    std::vector<FunctionalSpec> bins;
    add_bins(bins, Variable::count, quantile_edges(counts, quantile_bins));
    for (auto& b : bins) sets.push_back({u, b});
  }
  return sets;
}

MartingaleReport conditional_wald_check(const CompensatedEnsemble& ensemble, std::size_t t_index,
                                        std::span<const EventSpec> sets, const Strata& strata,
                                        double alpha, unsigned threads) {
  check_alpha(alpha);
  if (t_index >= ensemble.grid.size()) throw std::invalid_argument("t not on the grid");
  for (const auto& e : sets) {
    if (e.u_index > t_index) throw std::invalid_argument("event sets must be observed at u <= t");
  }
  MartingaleReport report;
  report.suite = "conditional_wald";
  report.series = "S-N*E[X]";
  report.alpha = alpha;
  report.metadata.paths = ensemble.series.size();
  const double mu = ensemble.claim_mean;

  const auto split = split_strata(ensemble, strata);
  for (std::size_t k = 0; k < split.labels.size(); ++k) {
    const auto& members = split.members[k];
    if (members.size() < kMinStratumPaths) {
      report.excluded_strata.push_back(split.labels[k] + " (" + std::to_string(members.size()) +
                                       " paths)");
      continue;
    }
    auto acc = chunked_reduce<BatteryAcc>(members.size(), threads, [&](BatteryAcc& a, std::size_t i) {
      a.ensure(sets.size());
      const auto& s = ensemble.series[members[i]];
      const double diff = s.aggregates[t_index] - s.counts[t_index] * mu;
      for (std::size_t j = 0; j < sets.size(); ++j) {
        const double g = sets[j].indicator.evaluate(s, sets[j].u_index);
        if (g != 0.0) a.hit[j] = 1;
        a.moments[j].add(diff * g);
      }
    });
    acc.ensure(sets.size());
    TestGroup group;
    group.label = "t=" + format_double(ensemble.grid[t_index]);
    for (std::size_t j = 0; j < sets.size(); ++j) {
      if (acc.hit[j]) {
        group.records.push_back(z_test(sets[j].label(), acc.moments[j]));
        ++report.family_size;
      } else {
        group.excluded.push_back(sets[j].label());
      }
    }
    StratumBlock block;
    block.label = split.labels[k];
    block.paths = members.size();
    block.groups.push_back(std::move(group));
    report.strata.push_back(std::move(block));
  }
  decide(report);
  return report;
}

ChiSquareResult poisson_chi_square(std::span<const std::size_t> counts, double mean,
                                   double alpha) {
  check_alpha(alpha);
  if (counts.empty()) throw std::invalid_argument("chi-square needs observations");
  if (!(mean > 0.0)) throw std::invalid_argument("Poisson mean must be > 0");
  constexpr double kMinExpected = 5.0;
  const std::size_t k_max = *std::max_element(counts.begin(), counts.end());
  std::vector<double> observed(k_max + 1, 0.0);
  for (std::size_t c : counts) observed[c] += 1.0;
  const double n = static_cast<double>(counts.size());

  std::vector<std::pair<double, double>> bins;  // (observed, expected)
  double cur_obs = 0.0;
  double cur_exp = 0.0;
  for (std::size_t k = 0; k <= k_max; ++k) {
    cur_obs += observed[k];
    cur_exp += n * poisson_pmf(mean, static_cast<long long>(k));
    if (cur_exp >= kMinExpected) {
      bins.emplace_back(cur_obs, cur_exp);
      cur_obs = cur_exp = 0.0;
    }
  }
  // P(N > k_max) = P(Gamma(k_max + 1) < mean).
  cur_exp += n * boost::math::gamma_p(static_cast<double>(k_max + 1), mean);
  if (cur_exp >= kMinExpected || bins.empty()) {
    bins.emplace_back(cur_obs, cur_exp);
  } else {
    bins.back().first += cur_obs;
    bins.back().second += cur_exp;
  }

  ChiSquareResult r;
  r.rate = mean;
  r.bins = bins.size();
  for (const auto& [o, e] : bins) r.statistic += (o - e) * (o - e) / e;
  if (bins.size() < 2) {
    r.p_value = 1.0;
    return r;
  }
  r.degrees_of_freedom = bins.size() - 1;
  const boost::math::chi_squared_distribution<double> dist(
      static_cast<double>(r.degrees_of_freedom));
  r.p_value = std::isfinite(r.statistic) ? boost::math::cdf(boost::math::complement(dist, r.statistic))
                                         : 0.0;
  r.reject = r.p_value < alpha;
  return r;
}

WatanabeReport watanabe_check(const CompensatedEnsemble& ensemble,
                              std::span<const TestCase> cases,
                              std::span<const std::size_t> time_indices, double theta0,
                              double alpha, unsigned threads) {
  if (!(theta0 > 0.0)) throw std::invalid_argument("theta0 must be > 0");
  WatanabeReport out;
  out.martingale = martingale_test(ensemble, Series::L, cases, alpha, threads);
  out.martingale.suite = "watanabe";
  const double per_time = alpha / static_cast<double>(std::max<std::size_t>(1, time_indices.size()));
  std::vector<std::size_t> counts(ensemble.series.size());
  for (std::size_t ti : time_indices) {
    if (ti == 0 || ti >= ensemble.grid.size()) {
      throw std::invalid_argument("chi-square times must be positive grid points");
    }
    for (std::size_t i = 0; i < counts.size(); ++i) {
      counts[i] = static_cast<std::size_t>(ensemble.series[i].counts[ti]);
    }
    auto r = poisson_chi_square(counts, theta0 * ensemble.grid[ti], per_time);
    r.t = ensemble.grid[ti];
    out.chi_square.push_back(r);
  }
  out.reject = out.martingale.reject ||
               std::any_of(out.chi_square.begin(), out.chi_square.end(),
                           [](const ChiSquareResult& r) { return r.reject; });
  return out;
}

std::vector<MomentCheck> pmf_check(std::span<const RiskPath> paths, const MixingLaw& mixing,
                                   double t, long long n_max, unsigned threads) {
  if (paths.empty()) throw std::invalid_argument("pmf check needs paths");
  if (n_max < 0) throw std::invalid_argument("n_max must be >= 0");
  struct Hist {
    std::vector<double> counts;
    void merge(const Hist& o) {
      if (counts.size() < o.counts.size()) counts.resize(o.counts.size(), 0.0);
      for (std::size_t k = 0; k < o.counts.size(); ++k) counts[k] += o.counts[k];
    }
  };
  const auto width = static_cast<std::size_t>(n_max) + 1;
  auto hist = chunked_reduce<Hist>(paths.size(), threads, [&](Hist& h, std::size_t i) {
    if (h.counts.empty()) h.counts.assign(width, 0.0);
    const std::size_t n = count_at(paths[i], t);
    if (n < width) h.counts[n] += 1.0;
  });
  hist.counts.resize(width, 0.0);
  const double total = static_cast<double>(paths.size());
  std::vector<MomentCheck> out;
  for (std::size_t k = 0; k < width; ++k) {
    MomentCheck c;
    c.label = "P(N_t=" + std::to_string(k) + ")";
    c.t = t;
    c.estimate = hist.counts[k] / total;
    c.target = mixed_poisson_pmf(mixing, t, static_cast<long long>(k));
    c.std_error = std::sqrt(c.target * (1.0 - c.target) / total);
    c.z = finite_z(c.estimate - c.target, c.std_error);
    c.within_band = std::abs(c.z) <= kMomentBand;
    out.push_back(c);
  }
  return out;
}

}  // namespace cmpplab
