#include "cmpplab/process.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "cmpplab/format.hpp"
#include "cmpplab/parallel.hpp"

namespace cmpplab {
namespace {

void require_horizon(double horizon) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("horizon must be > 0");
  }
}

void check_time(const RiskPath& path, double t) {
  if (!(t >= 0.0) || t > path.horizon()) {
    throw std::out_of_range("time " + format_double(t) + " outside [0, " +
                            format_double(path.horizon()) + "]");
  }
}

/// Accumulates arrivals from successive interarrival draws until the next one
/// would pass the horizon. A draw that does not advance the clock in floating
/// point is redrawn so arrivals stay strictly increasing.
template <class NextGap, class OnArrival>
std::vector<double> arrivals_until(double horizon, const SimulationLimits& limits,
                                   NextGap&& next_gap, OnArrival&& on_arrival) {
  std::vector<double> arrivals;
  double clock = 0.0;
  for (;;) {
    double gap = next_gap();
    double next = clock + gap;
    while (!(next > clock)) {
      gap = next_gap();
      next = clock + gap;
    }
    if (next > horizon) break;
    if (arrivals.size() >= limits.max_events) throw EventCapExceeded(limits.max_events);
    arrivals.push_back(next);
    on_arrival(gap);
    clock = next;
  }
  return arrivals;
}

}  // namespace

std::string to_string(ProcessKind kind) {
  switch (kind) {
    case ProcessKind::cpp: return "cpp";
    case ProcessKind::cmpp: return "cmpp";
    case ProcessKind::renewal: return "renewal";
  }
  return "unknown";
}

ProcessKind process_kind_from_string(const std::string& name) {
  if (name == "cpp") return ProcessKind::cpp;
  if (name == "cmpp") return ProcessKind::cmpp;
  if (name == "renewal") return ProcessKind::renewal;
  throw std::invalid_argument("unknown process kind '" + name + "'");
}

EventCapExceeded::EventCapExceeded(std::size_t cap)
    : std::runtime_error("event cap of " + std::to_string(cap) +
                         " arrivals exceeded before the horizon"),
      cap_(cap) {}

RiskPath::RiskPath(double theta, std::vector<double> arrivals, std::vector<double> claims,
                   double horizon, ProcessKind kind)
    : theta_(theta),
      arrivals_(std::move(arrivals)),
      claims_(std::move(claims)),
      horizon_(horizon),
      kind_(kind) {
  require_horizon(horizon_);
  if (!(theta_ > 0.0) || !std::isfinite(theta_)) {
    throw std::invalid_argument("theta must be > 0");
  }
  if (arrivals_.size() != claims_.size()) {
    throw std::invalid_argument("arrivals and claims must have the same length");
  }
  double previous = 0.0;
  for (double t : arrivals_) {
    if (!(t > previous)) throw std::invalid_argument("arrivals must be strictly increasing and > 0");
    previous = t;
  }
  if (!arrivals_.empty() && arrivals_.back() > horizon_) {
    throw std::invalid_argument("arrival beyond horizon");
  }
  cumulative_.reserve(claims_.size());
  double total = 0.0;
  for (double x : claims_) {
    if (!(x > 0.0) || !std::isfinite(x)) throw std::invalid_argument("claims must be > 0");
    total += x;
    cumulative_.push_back(total);
  }
}

TimeGrid::TimeGrid(std::vector<double> points) : points_(std::move(points)) {
  if (points_.empty() || points_.front() != 0.0) {
    throw std::invalid_argument("grid must start at 0");
  }
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (!(points_[i] > points_[i - 1]) || !std::isfinite(points_[i])) {
      throw std::invalid_argument("grid must be strictly increasing");
    }
  }
}

std::size_t TimeGrid::index_of(double t) const noexcept {
  const auto it = std::lower_bound(points_.begin(), points_.end(), t);
  if (it != points_.end() && *it == t) return static_cast<std::size_t>(it - points_.begin());
  return points_.size();
}

RiskPath simulate_cpp_path(double theta, const ClaimLaw& claims, double horizon,
                           PathStreams& streams, const SimulationLimits& limits) {
  require_horizon(horizon);
  if (!(theta > 0.0)) throw std::invalid_argument("theta must be > 0");
  std::exponential_distribution<double> gaps(theta);
  std::vector<double> sizes;
  auto arrivals = arrivals_until(
      horizon, limits, [&] { return gaps(streams.interarrival); },
      [&](double) { sizes.push_back(sample_claim(claims, streams.claims)); });
  return RiskPath(theta, std::move(arrivals), std::move(sizes), horizon, ProcessKind::cpp);
}

RiskPath simulate_cmpp_path(const MixingLaw& mixing, const ClaimLaw& claims, double horizon,
                            PathStreams& streams, const SimulationLimits& limits) {
  require_horizon(horizon);
  const double theta = sample_mixing(mixing, streams.mixing);
  RiskPath path = simulate_cpp_path(theta, claims, horizon, streams, limits);
  return RiskPath(theta, {path.arrivals().begin(), path.arrivals().end()},
                  {path.claims().begin(), path.claims().end()}, horizon, ProcessKind::cmpp);
}

RiskPath simulate_renewal_path(const ClaimLaw& interarrival, const ClaimLaw& claims,
                               double horizon, PathStreams& streams,
                               const SimulationLimits& limits, ClaimCoupling coupling) {
  require_horizon(horizon);
  std::vector<double> sizes;
  auto arrivals = arrivals_until(
      horizon, limits, [&] { return sample_claim(interarrival, streams.interarrival); },
      [&](double gap) {
        sizes.push_back(coupling == ClaimCoupling::interarrival
                            ? gap
                            : sample_claim(claims, streams.claims));
      });
  return RiskPath(1.0 / claim_mean(interarrival), std::move(arrivals), std::move(sizes),
                  horizon, ProcessKind::renewal);
}

std::size_t count_at(const RiskPath& path, double t) {
  check_time(path, t);
  const auto arrivals = path.arrivals();
  return static_cast<std::size_t>(std::upper_bound(arrivals.begin(), arrivals.end(), t) -
                                  arrivals.begin());
}

double aggregate_at(const RiskPath& path, double t) {
  const std::size_t n = count_at(path, t);
  return n == 0 ? 0.0 : path.cumulative_claims()[n - 1];
}

std::vector<double> increments(const RiskPath& path, const TimeGrid& grid, Quantity which) {
  std::vector<double> out;
  out.reserve(grid.size() - 1);
  auto value = [&](double t) {
    return which == Quantity::count ? static_cast<double>(count_at(path, t))
                                    : aggregate_at(path, t);
  };
  double previous = value(grid[0]);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double current = value(grid[i]);
    out.push_back(current - previous);
    previous = current;
  }
  return out;
}

double ProcessModel::claim_mean() const {
  if (kind == ProcessKind::renewal && coupling == ClaimCoupling::interarrival) {
    return cmpplab::claim_mean(interarrival);
  }
  return cmpplab::claim_mean(claims);
}

RiskPath simulate_path(const ProcessModel& model, PathStreams& streams,
                       const SimulationLimits& limits) {
  switch (model.kind) {
    case ProcessKind::cpp:
      return simulate_cpp_path(mixing_mean(model.mixing), model.claims, model.horizon, streams,
                               limits);
    case ProcessKind::cmpp:
      return simulate_cmpp_path(model.mixing, model.claims, model.horizon, streams, limits);
    case ProcessKind::renewal:
      return simulate_renewal_path(model.interarrival, model.claims, model.horizon, streams,
                                   limits, model.coupling);
  }
  throw std::logic_error("unhandled process kind");
}

std::vector<RiskPath> simulate_ensemble(const ProcessModel& model, std::size_t n_paths,
                                        const StreamFactory& factory, unsigned threads,
                                        const SimulationLimits& limits) {
  std::vector<std::vector<RiskPath>> chunks((n_paths + kChunkSize - 1) / kChunkSize);
  for_each_chunk(n_paths, threads, [&](std::size_t c, std::size_t begin, std::size_t end) {
    auto& out = chunks[c];
    out.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      PathStreams streams = factory.for_path(i);
      out.push_back(simulate_path(model, streams, limits));
    }
  });
  std::vector<RiskPath> paths;
  paths.reserve(n_paths);
  for (auto& chunk : chunks) {
    std::move(chunk.begin(), chunk.end(), std::back_inserter(paths));
  }
  return paths;
}

void write_paths_csv(std::ostream& out, std::span<const RiskPath> paths) {
  out << "path_id,theta,T_n,X_n\n";
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto& p = paths[i];
    const std::string theta = format_double(p.theta());
    for (std::size_t k = 0; k < p.size(); ++k) {
      out << i << ',' << theta << ',' << format_double(p.arrivals()[k]) << ','
          << format_double(p.claims()[k]) << '\n';
    }
  }
}

}  // namespace cmpplab
