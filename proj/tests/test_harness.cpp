#include <doctest.h>

#include <cmath>

#include "cmpplab/experiment.hpp"
#include "cmpplab/harness.hpp"
#include "oracles.hpp"

using namespace cmpplab;

namespace {

constexpr double kAlpha = 0.01;

ProcessModel cmpp(MixingLaw mixing, ClaimLaw claims, double horizon) {
  ProcessModel m;
  m.kind = ProcessKind::cmpp;
  m.mixing = std::move(mixing);
  m.claims = std::move(claims);
  m.horizon = horizon;
  return m;
}

ProcessModel deterministic_renewal() {
  ProcessModel m;
  m.kind = ProcessKind::renewal;
  m.interarrival = ClaimLaw::degenerate(0.5);
  m.claims = ClaimLaw::degenerate(1.0);
  m.horizon = 2.0;
  return m;
}

CompensatedEnsemble ensemble_of(const ProcessModel& model, std::size_t n, std::uint64_t seed,
                                const TimeGrid& grid, std::uint64_t domain = 0) {
  const auto paths = simulate_ensemble(model, n, StreamFactory(seed, domain));
  return compensate_ensemble(paths, grid, model.claim_mean());
}

std::vector<TestCase> cases_for(const ProcessModel& model, std::uint64_t seed, const TimeGrid& grid,
                                FamilyOptions options = {}) {
  const auto calib = ensemble_of(model, 10'000, seed, grid, 1);
  const auto pairs = all_pairs(grid);
  return build_test_cases(calib, pairs, options);
}

const TestRecord* find(const MartingaleReport& r, const std::string& group, const std::string& label) {
  for (const auto& block : r.strata) {
    for (const auto& g : block.groups) {
      if (g.label != group) continue;
      for (const auto& rec : g.records) {
        if (rec.label == label) return &rec;
      }
    }
  }
  return nullptr;
}

}  // namespace

TEST_CASE("compensate examples") {
  const TimeGrid grid({0.0, 0.5, 1.0});
  const RiskPath empty(2.0, {}, {}, 1.0, ProcessKind::cmpp);
  const auto s = compensate(empty, grid, 1.0);
  CHECK(s.m_values[0] == 0.0);
  CHECK(s.l_values[0] == 0.0);
  CHECK(s.l_values[1] == -1.0);
  CHECK(s.l_values[2] == -2.0);

  const RiskPath path(1.5, {0.2, 0.7}, {3.0, 4.0}, 1.0, ProcessKind::cmpp);
  const auto c = compensate(path, grid, 2.0);
  CHECK(c.counts == std::vector<double>{0.0, 1.0, 2.0});
  CHECK(c.aggregates == std::vector<double>{0.0, 3.0, 7.0});
  CHECK(c.m_values[2] == doctest::Approx(7.0 - 1.0 * 1.5 * 2.0));
  CHECK_THROWS_AS(compensate(path, TimeGrid({0.0, 2.0}), 1.0), std::invalid_argument);
}

TEST_CASE("unit claims make M and L coincide exactly") {
  const TimeGrid grid({0.0, 0.3, 1.0, 2.0});
  const auto model = cmpp(MixingLaw::gamma(2.0, 1.0), ClaimLaw::degenerate(1.0), 2.0);
  const auto e = ensemble_of(model, 2000, 3, grid);
  for (const auto& s : e.series) {
    CHECK(s.m_values == s.l_values);
    CHECK(s.m_values[0] == 0.0);
  }
}

TEST_CASE("zero process passes with all statistics exactly zero") {
  CompensatedEnsemble e;
  e.grid = TimeGrid({0.0, 1.0, 2.0});
  CompensatedSeries zero{1.0, {0, 1, 2}, {0, 1, 2}, {0, 0, 0}, {0, 0, 0}};
  e.series.assign(1000, zero);
  const std::vector<TestCase> cases = {{0, 1, {FunctionalSpec::constant()}},
                                       {1, 2, {FunctionalSpec::constant(), FunctionalSpec::power(Variable::count, 1)}}};
  const auto r = martingale_test(e, Series::M, cases, kAlpha);
  CHECK(r.accepted());
  CHECK(r.family_size == 3);
  for (const auto& g : r.strata[0].groups) {
    for (const auto& rec : g.records) {
      CHECK(rec.estimate == 0.0);
      CHECK(rec.std_error == 0.0);
      CHECK(rec.z == 0.0);
    }
  }
}

TEST_CASE("martingale_test preconditions") {
  CompensatedEnsemble e;
  e.grid = TimeGrid({0.0, 1.0});
  e.series.assign(999, CompensatedSeries{1.0, {0, 0}, {0, 0}, {0, 0}, {0, 0}});
  const std::vector<TestCase> cases = {{0, 1, {FunctionalSpec::constant()}}};
  CHECK_THROWS_AS(martingale_test(e, Series::L, cases, kAlpha), std::invalid_argument);
  e.series.emplace_back(e.series.front());
  CHECK_NOTHROW(martingale_test(e, Series::L, cases, kAlpha));
  const std::vector<TestCase> backwards = {{1, 0, {FunctionalSpec::constant()}}};
  CHECK_THROWS_AS(martingale_test(e, Series::L, backwards, kAlpha), std::invalid_argument);
  CHECK_THROWS_AS(martingale_test(e, Series::L, cases, 0.0), std::invalid_argument);
}

TEST_CASE("bins that never fire are excluded from the family") {
  const TimeGrid grid({0.0, 1.0});
  const auto model = cmpp(MixingLaw::degenerate(1.0), ClaimLaw::degenerate(1.0), 1.0);
  const auto e = ensemble_of(model, 2000, 4, grid);
  const std::vector<TestCase> cases = {
      {0, 1, {FunctionalSpec::constant(), FunctionalSpec::bin(Variable::theta, 5.0, 6.0)}}};
  const auto r = martingale_test(e, Series::L, cases, kAlpha);
  CHECK(r.family_size == 1);
  REQUIRE(r.strata[0].groups[0].excluded.size() == 1);
  CHECK(r.strata[0].groups[0].excluded[0] == "theta in [5,6)");
}

TEST_CASE("functional family is measurable at s and built from calibration quantiles") {
  const TimeGrid grid({0.0, 0.5, 1.0, 2.0});
  const auto model = cmpp(MixingLaw::gamma(2.0, 1.0), ClaimLaw::exponential(1.0), 2.0);
  const auto cases = cases_for(model, 5, grid);
  REQUIRE(cases.size() == 6);
  // At s = 0 only the constant and theta functionals are informative.
  for (const auto& f : cases[0].functionals) CHECK(f.variable != Variable::aggregate);
  bool has_count_bin = false;
  for (const auto& f : cases.back().functionals) {
    has_count_bin = has_count_bin || (f.kind == FunctionalKind::indicator_bin && f.variable == Variable::count);
  }
  CHECK(has_count_bin);

  const auto blind = cases_for(model, 5, grid, {4, true});
  for (const auto& c : blind) {
    for (const auto& f : c.functionals) CHECK_FALSE(f.uses_theta());
  }
}

TEST_CASE("true CMPP ensemble passes the M and L tests") {
  const TimeGrid grid({0.0, 0.5, 1.0, 2.0});
  const auto model = cmpp(MixingLaw::gamma(2.0, 1.0), ClaimLaw::exponential(1.0), 2.0);
  const auto cases = cases_for(model, 11, grid);
  const auto e = ensemble_of(model, 100'000, 11, grid);
  CHECK(martingale_test(e, Series::M, cases, kAlpha).accepted());
  CHECK(martingale_test(e, Series::L, cases, kAlpha).accepted());
}

TEST_CASE("evenly spaced arrivals are rejected with the exact deficit") {
  const TimeGrid grid({0.0, 0.75, 1.5, 2.0});
  const auto model = deterministic_renewal();
  const auto e = ensemble_of(model, 10'000, 12, grid);
  const auto r = martingale_test(e, Series::L, cases_for(model, 12, grid), kAlpha);
  CHECK(r.reject);
  const auto* rec = find(r, "s=0,t=0.75", "1");
  REQUIRE(rec != nullptr);
  CHECK(rec->estimate == -0.5);
  CHECK(rec->std_error == 0.0);
  CHECK(std::isinf(rec->z));
  CHECK(rec->reject);
}

TEST_CASE("z_test and report JSON handle infinite statistics") {
  MomentAccumulator acc;
  for (int i = 0; i < 10; ++i) acc.add(-0.5);
  const auto r = z_test("1", acc);
  CHECK(r.z == -std::numeric_limits<double>::infinity());
  CHECK(r.p_value == 0.0);
  MartingaleReport report;
  report.strata.push_back({"all", 10, {{"s=0,t=1", {r}, {}}}, true});
  const auto j = to_json(report);
  CHECK(j["strata"][0]["pairs"]["s=0,t=1"]["1"]["z"] == "-inf");
}

TEST_CASE("stratified test on two-point mixing") {
  const TimeGrid grid({0.0, 0.5, 1.0, 2.0});
  const auto model = cmpp(MixingLaw::discrete({1.0, 3.0}, {0.5, 0.5}), ClaimLaw::exponential(1.0), 2.0);
  const auto cases = cases_for(model, 13, grid);
  const auto e = ensemble_of(model, 100'000, 13, grid);
  for (Series series : {Series::M, Series::L}) {
    const auto r = stratified_martingale_test(e, series, cases, kAlpha, Strata{});
    REQUIRE(r.report.strata.size() == 2);
    CHECK(r.report.strata[0].label == "theta=1");
    CHECK(r.report.strata[1].label == "theta=3");
    for (const auto& b : r.report.strata) CHECK_FALSE(b.reject);
    for (const auto& c : r.mean_checks) {
      if (c.stratum == "theta=1" && c.t == 1.0) {
        CHECK(c.expected_count == 1.0);
        CHECK(c.within_band);
      }
    }
  }
}

TEST_CASE("single stratum reproduces martingale_test") {
  const TimeGrid grid({0.0, 0.5, 1.0});
  const auto model = cmpp(MixingLaw::degenerate(2.0), ClaimLaw::exponential(1.0), 1.0);
  const auto cases = cases_for(model, 14, grid);
  const auto e = ensemble_of(model, 5000, 14, grid);
  const auto plain = martingale_test(e, Series::M, cases, kAlpha);
  const auto strat = stratified_martingale_test(e, Series::M, cases, kAlpha, Strata{}).report;
  REQUIRE(strat.strata.size() == 1);
  CHECK(strat.family_size == plain.family_size);
  CHECK(strat.per_test_alpha == plain.per_test_alpha);
  CHECK(strat.reject == plain.reject);
  auto a = to_json(plain)["strata"][0];
  auto b = to_json(strat)["strata"][0];
  a.erase("stratum");
  b.erase("stratum");
  CHECK(a.dump() == b.dump());
}

TEST_CASE("stratified test still rejects the renewal counterexample") {
  const TimeGrid grid({0.0, 0.75, 1.5, 2.0});
  const auto model = deterministic_renewal();
  const auto e = ensemble_of(model, 5000, 15, grid);
  const auto r = stratified_martingale_test(e, Series::L, cases_for(model, 15, grid), kAlpha, Strata{});
  CHECK(r.report.reject);
}

TEST_CASE("sparse strata are reported and excluded") {
  const TimeGrid grid({0.0, 1.0});
  const auto model = cmpp(MixingLaw::discrete({1.0, 3.0}, {0.995, 0.005}), ClaimLaw::degenerate(1.0), 1.0);
  const auto e = ensemble_of(model, 5000, 16, grid);
  const std::vector<TestCase> cases = {{0, 1, {FunctionalSpec::constant()}}};
  const auto r = stratified_martingale_test(e, Series::L, cases, kAlpha, Strata{false, {2.0}});
  REQUIRE(r.report.strata.size() == 1);
  CHECK(r.report.strata[0].label == "theta in [-inf,2)");
  REQUIRE(r.report.excluded_strata.size() == 1);
  CHECK(r.report.excluded_strata[0].rfind("theta in [2,inf)", 0) == 0);
}

TEST_CASE("wald_check examples") {
  const auto gamma = cmpp(MixingLaw::gamma(2.0, 1.0), ClaimLaw::degenerate(1.0), 3.0);
  const auto paths = simulate_ensemble(gamma, 100'000, StreamFactory(17));
  const auto c = wald_check(paths, 3.0, 2.0, 1.0);
  CHECK(c.target == 6.0);
  CHECK(c.within_band);

  const auto at_zero = wald_check(paths, 0.0, 2.0, 1.0);
  CHECK(at_zero.target == 0.0);
  CHECK(at_zero.estimate == 0.0);
  CHECK(at_zero.z == 0.0);

  const auto exp_claims = cmpp(MixingLaw::degenerate(4.0), ClaimLaw::exponential(2.0), 1.0);
  const auto p2 = simulate_ensemble(exp_claims, 20'000, StreamFactory(18));
  const auto c2 = wald_check(p2, 1.0, mixing_mean(exp_claims.mixing), exp_claims.claim_mean());
  CHECK(c2.target == 2.0);
  CHECK(c2.within_band);
}

TEST_CASE("conditional Wald: unit claims give an identically zero statistic") {
  const TimeGrid grid({0.0, 0.5, 1.0});
  const auto model = cmpp(MixingLaw::gamma(2.0, 1.0), ClaimLaw::degenerate(1.0), 1.0);
  const auto e = ensemble_of(model, 2000, 19, grid);
  const std::vector<EventSpec> omega = {{0, FunctionalSpec::constant()}};
  const auto r = conditional_wald_check(e, 2, omega, Strata{false, {}}, kAlpha);
  REQUIRE(r.strata.size() == 1);
  const auto& rec = r.strata[0].groups[0].records.at(0);
  CHECK(rec.label == "Omega");
  CHECK(rec.estimate == 0.0);
  CHECK(rec.z == 0.0);
  CHECK(r.accepted());
}

TEST_CASE("conditional Wald accepts independent claims within strata") {
  const TimeGrid grid({0.0, 0.5, 1.0});
  const auto model = cmpp(MixingLaw::discrete({1.0, 3.0}, {0.5, 0.5}), ClaimLaw::exponential(1.0), 1.0);
  const auto e = ensemble_of(model, 100'000, 20, grid);
  const std::vector<EventSpec> sets = {{0, FunctionalSpec::constant()},
                                       {1, FunctionalSpec::bin(Variable::count, 0.0, 1.0)}};
  CHECK(sets[1].label() == "N_u in [0,1)");
  const auto r = conditional_wald_check(e, 2, sets, Strata{}, kAlpha);
  CHECK(r.strata.size() == 2);
  CHECK(r.family_size == 4);
  CHECK(r.accepted());
}

TEST_CASE("conditional Wald rejects claims equal to the interarrival gaps") {
  const TimeGrid grid({0.0, 0.5, 1.0});
  ProcessModel model;
  model.kind = ProcessKind::renewal;
  model.interarrival = ClaimLaw::exponential(1.0);
  model.coupling = ClaimCoupling::interarrival;
  model.horizon = 1.0;
  // Pilot-sized: E[S_1 - N_1] = -(1 - e^{-1}) per path, so 1000 paths give |z| >> 4.
  const auto e = ensemble_of(model, 1000, 21, grid);
  const auto calib = ensemble_of(model, 10'000, 21, grid, 1);
  const auto sets = build_event_sets(calib, 2);
  const auto r = conditional_wald_check(e, 2, sets, Strata{}, kAlpha);
  CHECK(r.reject);
  const auto* omega = find(r, "t=1", "Omega");
  REQUIRE(omega != nullptr);
  CHECK(omega->estimate < -0.5);
}

TEST_CASE("event sets are observed no later than t") {
  const TimeGrid grid({0.0, 0.5, 1.0, 2.0});
  const auto model = cmpp(MixingLaw::gamma(2.0, 1.0), ClaimLaw::exponential(1.0), 2.0);
  const auto calib = ensemble_of(model, 5000, 22, grid, 1);
  const auto sets = build_event_sets(calib, 2);
  CHECK(sets.front().label() == "Omega");
  for (const auto& s : sets) CHECK(s.u_index <= 2);
  const std::vector<EventSpec> late = {{3, FunctionalSpec::constant()}};
  CHECK_THROWS_AS(conditional_wald_check(calib, 2, late, Strata{}, kAlpha), std::invalid_argument);
}

TEST_CASE("chi-square against Poisson") {
  // Counts laid out in exact Poisson(1) proportions fit almost perfectly.
  std::vector<std::size_t> counts;
  for (std::size_t k = 0; k <= 8; ++k) {
    const auto copies = static_cast<std::size_t>(std::lround(100'000 * oracle::poisson_pmf_product(1.0, int(k))));
    counts.insert(counts.end(), copies, k);
  }
  const auto fit = poisson_chi_square(counts, 1.0, kAlpha);
  CHECK_FALSE(fit.reject);
  CHECK(fit.statistic < 1.0);
  CHECK(fit.bins >= 5);

  const std::vector<std::size_t> constant(10'000, 1);
  const auto bad = poisson_chi_square(constant, 1.0, kAlpha);
  CHECK(bad.reject);
  CHECK(bad.p_value == doctest::Approx(0.0));
}

TEST_CASE("watanabe check") {
  const TimeGrid grid({0.0, 0.5, 1.0, 2.0});
  const std::vector<std::size_t> times = {1, 2, 3};
  const auto model = cmpp(MixingLaw::degenerate(2.0), ClaimLaw::exponential(1.0), 2.0);
  const auto paths = simulate_ensemble(model, 100'000, StreamFactory(23));
  const auto e = compensate_ensemble(paths, grid, 1.0);
  const auto cases = cases_for(model, 23, grid);

  const auto ok = watanabe_check(e, cases, times, 2.0, kAlpha);
  CHECK_FALSE(ok.reject);
  CHECK(ok.chi_square.size() == 3);
  const auto pmf = pmf_check(paths, model.mixing, 1.0, 0);
  CHECK(pmf[0].target == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
  CHECK(pmf[0].within_band);

  const auto wrong = watanabe_check(e, cases, times, 3.0, kAlpha);
  CHECK(wrong.reject);
  for (const auto& c : wrong.chi_square) CHECK(c.reject);

  const auto renewal = deterministic_renewal();
  const auto re = ensemble_of(renewal, 10'000, 24, grid);
  const auto masquerade = watanabe_check(re, cases_for(renewal, 24, grid), times, 2.0, kAlpha);
  CHECK(masquerade.reject);
  for (const auto& c : masquerade.chi_square) CHECK(c.reject);
}

TEST_CASE("statistics do not depend on the thread count") {
  const TimeGrid grid({0.0, 0.5, 1.0, 2.0});
  const auto model = cmpp(MixingLaw::gamma(2.0, 1.0), ClaimLaw::lognormal(0.0, 0.5), 2.0);
  const auto paths = simulate_ensemble(model, 30'000, StreamFactory(25));
  const auto e1 = compensate_ensemble(paths, grid, model.claim_mean(), 1);
  const auto e8 = compensate_ensemble(paths, grid, model.claim_mean(), 8);
  const auto cases = cases_for(model, 25, grid);
  CHECK(to_json(martingale_test(e1, Series::M, cases, kAlpha, 1)).dump() ==
        to_json(martingale_test(e8, Series::M, cases, kAlpha, 8)).dump());
  const auto w1 = wald_check(paths, 2.0, 2.0, model.claim_mean(), 1);
  const auto w8 = wald_check(paths, 2.0, 2.0, model.claim_mean(), 8);
  CHECK(w1.estimate == w8.estimate);
  CHECK(w1.std_error == w8.std_error);
}
