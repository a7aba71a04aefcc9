#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmpplab/distributions.hpp"
#include "cmpplab/process.hpp"
#include "cmpplab/summation.hpp"

namespace cmpplab {

/// A path observed on a grid, together with its compensated forms
///   M_t = S_t - t * theta * E[X_1],   L_t = N_t - t * theta.
/// Counts and aggregates are kept so that functionals of time-s information
/// can be evaluated without re-reading the path.
struct CompensatedSeries {
  double theta = 0.0;
  std::vector<double> counts;
  std::vector<double> aggregates;
  std::vector<double> m_values;
  std::vector<double> l_values;
};

CompensatedSeries compensate(const RiskPath& path, const TimeGrid& grid, double claim_mean);

/// Series of an ensemble sharing one grid.
struct CompensatedEnsemble {
  TimeGrid grid{{0.0}};
  double claim_mean = 1.0;
  std::vector<CompensatedSeries> series;
};

CompensatedEnsemble compensate_ensemble(std::span<const RiskPath> paths, const TimeGrid& grid,
                                        double claim_mean, unsigned threads = 1);

enum class Series { M, L };
std::string to_string(Series series);

enum class FunctionalKind { indicator_bin, polynomial };
enum class Variable { count, aggregate, theta };

/// A function of (N_s, S_s, theta), hence measurable at time s.
/// Indicator bins are half-open [lo, hi); polynomials are v^degree with
/// degree in {0, 1, 2} (degree 0 is the constant 1).
struct FunctionalSpec {
  FunctionalKind kind = FunctionalKind::polynomial;
  Variable variable = Variable::count;
  double lo = 0.0;
  double hi = 0.0;
  int degree = 0;

  static FunctionalSpec constant();
  static FunctionalSpec bin(Variable v, double lo, double hi);
  static FunctionalSpec power(Variable v, int degree);

  double evaluate(const CompensatedSeries& series, std::size_t s_index) const;
  bool uses_theta() const noexcept;
  std::string label() const;
};

/// One (s, t) pair of grid indices and the functionals tested on it.
struct TestCase {
  std::size_t s_index = 0;
  std::size_t t_index = 0;
  std::vector<FunctionalSpec> functionals;
};

struct FamilyOptions {
  std::size_t quantile_bins = 4;
  /// Drop functionals of theta, leaving only the information in (N, S).
  bool theta_blind = false;
};

/// Builds the functional family for each pair. Bin edges are empirical
/// quantiles of the *calibration* ensemble, never of the tested one.
std::vector<TestCase> build_test_cases(const CompensatedEnsemble& calibration,
                                       std::span<const std::pair<std::size_t, std::size_t>> pairs,
                                       const FamilyOptions& options = {});

/// All index pairs s < t of a grid.
std::vector<std::pair<std::size_t, std::size_t>> all_pairs(const TimeGrid& grid);

struct TestRecord {
  std::string label;
  double estimate = 0.0;
  double std_error = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  bool reject = false;
};

struct TestGroup {
  std::string label;  // e.g. "s=0.5,t=1"
  std::vector<TestRecord> records;
  std::vector<std::string> excluded;  // degenerate functionals
};

struct StratumBlock {
  std::string label;
  std::size_t paths = 0;
  std::vector<TestGroup> groups;
  bool reject = false;
};

struct ReportMetadata {
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  std::string process_kind;
};

/// Family-wise result of a Bonferroni-corrected battery of z-tests.
struct MartingaleReport {
  std::string suite;
  std::string series;
  double alpha = 0.01;
  std::size_t family_size = 0;
  double per_test_alpha = 0.0;
  ReportMetadata metadata;
  std::vector<StratumBlock> strata;
  std::vector<std::string> excluded_strata;
  bool reject = false;

  bool accepted() const noexcept { return !reject; }
};

/// z statistic and two-sided p-value for a sample mean against zero. A zero
/// standard error yields z = 0 for a zero mean and +-inf otherwise.
TestRecord z_test(std::string label, const MomentAccumulator& acc);

/// Tests E[(Z_t - Z_s) g] = 0 for every case and functional, Bonferroni
/// corrected over all non-degenerate combinations. Functionals that vanish
/// on every path are excluded from the family and listed in the report.
/// Throws std::invalid_argument for fewer than `min_paths` series.
MartingaleReport martingale_test(const CompensatedEnsemble& ensemble, Series series,
                                 std::span<const TestCase> cases, double alpha,
                                 unsigned threads = 1, std::size_t min_paths = 1000);

/// Theta strata. `exact` groups paths by their exact theta value; otherwise
/// `edges` are interior cut points giving bins (-inf,e1), [e1,e2), ..., [ek,inf).
struct Strata {
  bool exact = true;
  std::vector<double> edges;
};

inline constexpr std::size_t kMinStratumPaths = 100;

struct StratumSplit {
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> members;
};

StratumSplit split_strata(const CompensatedEnsemble& ensemble, const Strata& strata);

/// Within-stratum check of E[L_t] = 0, i.e. E[N_t] = t * E[theta | stratum].
struct StratumMeanCheck {
  std::string stratum;
  double t = 0.0;
  double mean_count = 0.0;
  double expected_count = 0.0;
  double std_error = 0.0;
  double z = 0.0;
  bool within_band = true;
};

struct StratifiedReport {
  MartingaleReport report;
  std::vector<StratumMeanCheck> mean_checks;
};

inline constexpr double kMomentBand = 4.0;

/// Runs the martingale battery separately inside every stratum with at least
/// kMinStratumPaths paths, splitting alpha evenly across those strata.
StratifiedReport stratified_martingale_test(const CompensatedEnsemble& ensemble, Series series,
                                            std::span<const TestCase> cases, double alpha,
                                            const Strata& strata, unsigned threads = 1);

/// A statistic compared with a closed-form target, accepted within
/// kMomentBand standard errors.
struct MomentCheck {
  std::string label;
  double t = 0.0;
  double estimate = 0.0;
  double target = 0.0;
  double std_error = 0.0;
  double z = 0.0;
  bool within_band = true;
};

/// Mean of S_t over the ensemble against t * E[Theta] * E[X_1].
MomentCheck wald_check(std::span<const RiskPath> paths, double t, double mixing_mean,
                       double claim_mean, unsigned threads = 1);

/// An F_u-measurable set {g(N_u, S_u, theta) != 0} used to localize the
/// conditional Wald identity.
struct EventSpec {
  std::size_t u_index = 0;
  FunctionalSpec indicator;
  std::string label() const;
};

/// Default sets: the whole space plus N_u quantile bins for each grid u <= t.
std::vector<EventSpec> build_event_sets(const CompensatedEnsemble& calibration,
                                        std::size_t t_index, std::size_t quantile_bins = 4);

/// Within each stratum and set A, tests E[(S_t - N_t E[X_1]) 1_A] = 0,
/// Bonferroni corrected across all (stratum, set) combinations.
MartingaleReport conditional_wald_check(const CompensatedEnsemble& ensemble, std::size_t t_index,
                                        std::span<const EventSpec> sets, const Strata& strata,
                                        double alpha, unsigned threads = 1);

struct ChiSquareResult {
  double t = 0.0;
  double rate = 0.0;  // Poisson mean theta0 * t
  double statistic = 0.0;
  std::size_t bins = 0;
  std::size_t degrees_of_freedom = 0;
  double p_value = 1.0;
  bool reject = false;
};

/// Pearson goodness of fit of counts against Poisson(mean), pooling adjacent
/// values until each bin expects at least 5 observations. The last bin
/// collects the upper tail.
ChiSquareResult poisson_chi_square(std::span<const std::size_t> counts, double mean,
                                   double alpha);

struct WatanabeReport {
  MartingaleReport martingale;
  std::vector<ChiSquareResult> chi_square;
  bool reject = false;
};

/// Martingale test of N_t - t theta0 plus a Poisson(theta0 t) goodness of fit
/// at each requested grid index. Chi-square tests share alpha via Bonferroni.
WatanabeReport watanabe_check(const CompensatedEnsemble& ensemble,
                              std::span<const TestCase> cases,
                              std::span<const std::size_t> time_indices, double theta0,
                              double alpha, unsigned threads = 1);

/// Empirical P(N_t = n) against the mixed Poisson pmf for n = 0..n_max.
std::vector<MomentCheck> pmf_check(std::span<const RiskPath> paths, const MixingLaw& mixing,
                                   double t, long long n_max, unsigned threads = 1);

}  // namespace cmpplab
