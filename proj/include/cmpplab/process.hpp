#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmpplab/distributions.hpp"
#include "cmpplab/rng.hpp"

namespace cmpplab {

enum class ProcessKind { cpp, cmpp, renewal };

std::string to_string(ProcessKind kind);
ProcessKind process_kind_from_string(const std::string& name);

/// Thrown when a path would need more events than the configured cap before
/// reaching its horizon. Paths are never silently truncated.
class EventCapExceeded : public std::runtime_error {
 public:
  explicit EventCapExceeded(std::size_t cap);
  std::size_t cap() const noexcept { return cap_; }

 private:
  std::size_t cap_;
};

struct SimulationLimits {
  std::size_t max_events = 10'000'000;
};

/// One realized trajectory of a risk process on [0, horizon].
///
/// Arrivals are strictly increasing and lie in (0, horizon]; claims are
/// positive and paired with arrivals by index. The constructor enforces both.
class RiskPath {
 public:
  RiskPath(double theta, std::vector<double> arrivals, std::vector<double> claims,
           double horizon, ProcessKind kind);

  double theta() const noexcept { return theta_; }
  double horizon() const noexcept { return horizon_; }
  ProcessKind kind() const noexcept { return kind_; }
  std::span<const double> arrivals() const noexcept { return arrivals_; }
  std::span<const double> claims() const noexcept { return claims_; }
  std::size_t size() const noexcept { return arrivals_.size(); }

  /// cumulative_claims()[k] is the total of the first k+1 claims.
  std::span<const double> cumulative_claims() const noexcept { return cumulative_; }

  friend bool operator==(const RiskPath&, const RiskPath&) = default;

 private:
  double theta_;
  std::vector<double> arrivals_;
  std::vector<double> claims_;
  std::vector<double> cumulative_;
  double horizon_;
  ProcessKind kind_;
};

/// Strictly increasing time points starting at 0.
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> points);

  std::span<const double> points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }
  double back() const { return points_.back(); }

  /// Index of a grid point equal to t, or size() if t is not on the grid.
  std::size_t index_of(double t) const noexcept;

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  std::vector<double> points_;
};

/// How claim sizes relate to interarrival times on a renewal path. The
/// `interarrival` coupling sets X_n = W_n, which deliberately breaks the
/// independence of the two sequences.
enum class ClaimCoupling { independent, interarrival };

RiskPath simulate_cpp_path(double theta, const ClaimLaw& claims, double horizon,
                           PathStreams& streams, const SimulationLimits& limits = {});

RiskPath simulate_cmpp_path(const MixingLaw& mixing, const ClaimLaw& claims, double horizon,
                            PathStreams& streams, const SimulationLimits& limits = {});

RiskPath simulate_renewal_path(const ClaimLaw& interarrival, const ClaimLaw& claims,
                               double horizon, PathStreams& streams,
                               const SimulationLimits& limits = {},
                               ClaimCoupling coupling = ClaimCoupling::independent);

/// N_t: arrivals at or before t. Throws std::out_of_range outside [0, horizon].
std::size_t count_at(const RiskPath& path, double t);

/// S_t: total of the claims attached to arrivals at or before t.
double aggregate_at(const RiskPath& path, double t);

enum class Quantity { count, aggregate };

/// Successive differences of N or S along the grid (size() - 1 values).
std::vector<double> increments(const RiskPath& path, const TimeGrid& grid, Quantity which);

/// Everything needed to regenerate any path of an ensemble from its index.
struct ProcessModel {
  ProcessKind kind = ProcessKind::cmpp;
  MixingLaw mixing = MixingLaw::degenerate(1.0);  // cpp uses the degenerate atom as theta
  ClaimLaw claims = ClaimLaw::degenerate(1.0);
  ClaimLaw interarrival = ClaimLaw::exponential(1.0);  // renewal only
  ClaimCoupling coupling = ClaimCoupling::independent;
  double horizon = 1.0;

  /// E[X_1] for the claims this model actually attaches to arrivals.
  double claim_mean() const;
};

RiskPath simulate_path(const ProcessModel& model, PathStreams& streams,
                       const SimulationLimits& limits = {});

/// Simulates paths 0..n_paths-1; path i depends only on (factory, i).
std::vector<RiskPath> simulate_ensemble(const ProcessModel& model, std::size_t n_paths,
                                        const StreamFactory& factory, unsigned threads = 1,
                                        const SimulationLimits& limits = {});

/// CSV dump, one row per event: path_id,theta,T_n,X_n.
void write_paths_csv(std::ostream& out, std::span<const RiskPath> paths);

}  // namespace cmpplab
