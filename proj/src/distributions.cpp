#include "cmpplab/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace cmpplab {
namespace {

constexpr double kWeightTolerance = 1e-12;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw std::invalid_argument(std::string(name) + " must be > 0");
  }
}

std::vector<double> validated_cdf(const std::vector<double>& atoms,
                                  const std::vector<double>& weights) {
  if (atoms.empty()) throw std::invalid_argument("atoms must not be empty");
  if (atoms.size() != weights.size()) {
    throw std::invalid_argument("atoms and weights must have the same length");
  }
  for (double a : atoms) require_positive(a, "atoms");
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("weights must be >= 0");
    }
  }
  std::vector<double> cdf(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cdf.begin());
  if (std::abs(cdf.back() - 1.0) > kWeightTolerance) {
    throw std::invalid_argument("weights must sum to 1");
  }
  return cdf;
}

std::size_t draw_atom(const std::vector<double>& cdf, RngStream& stream) {
  // Scale by the total so a sum of 1 - 1e-13 cannot fall off the end.
  const double u = stream.uniform() * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return static_cast<std::size_t>(std::min<std::ptrdiff_t>(
      it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
}

double weighted_sum(const std::vector<double>& atoms, const std::vector<double>& weights,
                    auto&& f) {
  double total = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) total += weights[i] * f(atoms[i]);
  return total;
}

}  // namespace

MixingLaw::MixingLaw(Variant v) : law_(std::move(v)) {}

MixingLaw MixingLaw::degenerate(double theta0) {
  require_positive(theta0, "theta");
  return MixingLaw(DegenerateMixing{theta0});
}

MixingLaw MixingLaw::gamma(double shape, double rate) {
  require_positive(shape, "shape");
  require_positive(rate, "rate");
  return MixingLaw(GammaMixing{shape, rate});
}

MixingLaw MixingLaw::discrete(std::vector<double> atoms, std::vector<double> weights) {
  auto cdf = validated_cdf(atoms, weights);
  MixingLaw law(DiscreteMixing{std::move(atoms), std::move(weights)});
  law.cdf_ = std::move(cdf);
  return law;
}

bool MixingLaw::is_degenerate() const noexcept {
  if (std::holds_alternative<DegenerateMixing>(law_)) return true;
  if (const auto* d = std::get_if<DiscreteMixing>(&law_)) {
    std::size_t support = 0;
    for (std::size_t i = 0; i < d->atoms.size(); ++i) {
      if (d->weights[i] > 0.0) ++support;
    }
    return support == 1;
  }
  return false;
}

std::string MixingLaw::type_name() const {
  return std::visit(overloaded{[](const DegenerateMixing&) { return "degenerate"; },
                               [](const GammaMixing&) { return "gamma"; },
                               [](const DiscreteMixing&) { return "discrete"; }},
                    law_);
}

ClaimLaw::ClaimLaw(Variant v) : law_(std::move(v)) {}

ClaimLaw ClaimLaw::degenerate(double x0) {
  require_positive(x0, "value");
  return ClaimLaw(DegenerateClaim{x0});
}

ClaimLaw ClaimLaw::exponential(double rate) {
  require_positive(rate, "rate");
  return ClaimLaw(ExponentialClaim{rate});
}

ClaimLaw ClaimLaw::lognormal(double mu, double sigma) {
  if (!std::isfinite(mu)) throw std::invalid_argument("mu must be finite");
  require_positive(sigma, "sigma");
  return ClaimLaw(LogNormalClaim{mu, sigma});
}

ClaimLaw ClaimLaw::discrete(std::vector<double> atoms, std::vector<double> weights) {
  auto cdf = validated_cdf(atoms, weights);
  ClaimLaw law(DiscreteClaim{std::move(atoms), std::move(weights)});
  law.cdf_ = std::move(cdf);
  return law;
}

std::string ClaimLaw::type_name() const {
  return std::visit(overloaded{[](const DegenerateClaim&) { return "degenerate"; },
                               [](const ExponentialClaim&) { return "exponential"; },
                               [](const LogNormalClaim&) { return "lognormal"; },
                               [](const DiscreteClaim&) { return "discrete"; }},
                    law_);
}

double mixing_mean(const MixingLaw& law) {
  return std::visit(
      overloaded{[](const DegenerateMixing& d) { return d.theta0; },
                 [](const GammaMixing& g) { return g.shape / g.rate; },
                 [](const DiscreteMixing& d) {
                   return weighted_sum(d.atoms, d.weights, [](double a) { return a; });
                 }},
      law.variant());
}

double mixing_variance(const MixingLaw& law) {
  return std::visit(
      overloaded{[](const DegenerateMixing&) { return 0.0; },
                 [](const GammaMixing& g) { return g.shape / (g.rate * g.rate); },
                 [&](const DiscreteMixing& d) {
                   const double m = mixing_mean(law);
                   return weighted_sum(d.atoms, d.weights,
                                       [m](double a) { return (a - m) * (a - m); });
                 }},
      law.variant());
}

double claim_mean(const ClaimLaw& law) {
  return std::visit(
      overloaded{[](const DegenerateClaim& d) { return d.x0; },
                 [](const ExponentialClaim& e) { return 1.0 / e.rate; },
                 [](const LogNormalClaim& l) { return std::exp(l.mu + 0.5 * l.sigma * l.sigma); },
                 [](const DiscreteClaim& d) {
                   return weighted_sum(d.atoms, d.weights, [](double a) { return a; });
                 }},
      law.variant());
}

double claim_variance(const ClaimLaw& law) {
  return std::visit(
      overloaded{[](const DegenerateClaim&) { return 0.0; },
                 [](const ExponentialClaim& e) { return 1.0 / (e.rate * e.rate); },
                 [](const LogNormalClaim& l) {
                   const double s2 = l.sigma * l.sigma;
                   return std::expm1(s2) * std::exp(2.0 * l.mu + s2);
                 },
                 [&](const DiscreteClaim& d) {
                   const double m = claim_mean(law);
                   return weighted_sum(d.atoms, d.weights,
                                       [m](double a) { return (a - m) * (a - m); });
                 }},
      law.variant());
}

bool has_finite_variance(const ClaimLaw& law) { return std::isfinite(claim_variance(law)); }

double sample_mixing(const MixingLaw& law, RngStream& stream) {
  return std::visit(
      overloaded{[](const DegenerateMixing& d) { return d.theta0; },
                 [&](const GammaMixing& g) {
                   std::gamma_distribution<double> dist(g.shape, 1.0 / g.rate);
                   double x = dist(stream);
                   while (!(x > 0.0)) x = dist(stream);
                   return x;
                 },
                 [&](const DiscreteMixing& d) { return d.atoms[draw_atom(law.cdf(), stream)]; }},
      law.variant());
}

double sample_claim(const ClaimLaw& law, RngStream& stream) {
  return std::visit(
      overloaded{[](const DegenerateClaim& d) { return d.x0; },
                 [&](const ExponentialClaim& e) {
                   std::exponential_distribution<double> dist(e.rate);
                   double x = dist(stream);
                   while (!(x > 0.0)) x = dist(stream);
                   return x;
                 },
                 [&](const LogNormalClaim& l) {
                   std::lognormal_distribution<double> dist(l.mu, l.sigma);
                   double x = dist(stream);
                   while (!(x > 0.0)) x = dist(stream);
                   return x;
                 },
                 [&](const DiscreteClaim& d) { return d.atoms[draw_atom(law.cdf(), stream)]; }},
      law.variant());
}

double poisson_pmf(double mean, long long n) {
  if (n < 0) throw std::invalid_argument("n must be >= 0");
  if (mean == 0.0) return n == 0 ? 1.0 : 0.0;
  const double k = static_cast<double>(n);
  return std::exp(-mean + k * std::log(mean) - std::lgamma(k + 1.0));
}

double mixed_poisson_pmf(const MixingLaw& law, double t, long long n) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("t must be >= 0");
  if (n < 0) throw std::invalid_argument("n must be >= 0");
  if (t == 0.0) return n == 0 ? 1.0 : 0.0;
  return std::visit(
      overloaded{[&](const DegenerateMixing& d) { return poisson_pmf(t * d.theta0, n); },
                 [&](const GammaMixing& g) {
                   const double k = static_cast<double>(n);
                   const double a = g.shape;
                   const double log_binom =
                       std::lgamma(k + a) - std::lgamma(a) - std::lgamma(k + 1.0);
                   const double log_p = -std::log1p(t / g.rate);
                   const double log_q = std::log(t) - std::log(g.rate + t);
                   return std::exp(log_binom + a * log_p + k * log_q);
                 },
                 [&](const DiscreteMixing& d) {
                   return weighted_sum(d.atoms, d.weights,
                                       [&](double a) { return poisson_pmf(t * a, n); });
                 }},
      law.variant());
}

}  // namespace cmpplab
