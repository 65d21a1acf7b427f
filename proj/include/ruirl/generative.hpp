// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ruirl/random.hpp"
#include "ruirl/rucore.hpp"
#include "ruirl/trajectory.hpp"
#include "ruirl/types.hpp"

namespace ruirl {

/// Empirical origin-destination distribution: relative frequency of (o, d)
/// pairs with o != d, taken from a trajectory corpus or set directly.
class ODDistribution {
 public:
  ODDistribution() = default;

  explicit ODDistribution(std::map<std::pair<LocationId, LocationId>, double> weights) {
    double total = 0.0;
    for (const auto& [od, w] : weights) {
      if (w < 0 || !std::isfinite(w))
        throw std::invalid_argument("OD weights must be finite and >= 0");
      if (od.first == od.second && w > 0)
        throw std::invalid_argument("OD pairs with origin == destination are excluded");
      total += w;
    }
    if (!(total > 0)) throw EmptyInput("OD distribution has no mass");
    for (const auto& [od, w] : weights)
      if (w > 0) entries_.emplace_back(od, w / total);
  }

  static ODDistribution from_corpus(const Dataset& data) {
    std::map<std::pair<LocationId, LocationId>, double> counts;
    for (const auto& t : data.trajectories) {
      if (t.size() < 2) continue;
      if (t.origin() == t.destination()) continue;
      counts[{t.origin(), t.destination()}] += 1.0;
    }
    return ODDistribution(std::move(counts));
  }

  const std::vector<std::pair<std::pair<LocationId, LocationId>, double>>& entries() const {
    return entries_;
  }

  double probability(LocationId o, LocationId d) const {
    for (const auto& [od, p] : entries_)
      if (od.first == o && od.second == d) return p;
    return 0.0;
  }

  std::pair<LocationId, LocationId> sample(RandomStream& rng) const {
    if (entries_.empty()) throw EmptyInput("OD distribution has no mass");
    const double u = uniform01(rng);
    double cum = 0.0;
    for (const auto& [od, p] : entries_) {
      cum += p;
      if (u <= cum) return od;
    }
    return entries_.back().first;
  }

 private:
  // (o, d) -> probability, ascending od order (std::map iteration order).
  std::vector<std::pair<std::pair<LocationId, LocationId>, double>> entries_;
};

inline std::pair<LocationId, LocationId> sample_od(const ODDistribution& od,
                                                   RandomStream& rng) {
  return od.sample(rng);
}

namespace detail {

inline LocationId sample_categorical(const std::vector<LocationId>& succ,
                                     const std::vector<double>& log_p, RandomStream& rng) {
  const double u = uniform01(rng);
  double cum = 0.0;
  LocationId last = -1;
  for (std::size_t i = 0; i < succ.size(); ++i) {
    if (log_p[i] == -kInfinity) continue;
    last = succ[i];
    cum += std::exp(log_p[i]);
    if (u <= cum) return succ[i];
  }
  return last;  // guard against rounding in the cumulative sum
}

}  // namespace detail

/// Samples one trajectory from the model: starting at `origin`, repeatedly
/// draw the next location from the choice distribution for `destination`
/// until the destination is reached. Draws longer than max_len locations are
/// rejected and resampled, up to 100 attempts.
inline Trajectory sample_trajectory(const SensorGraph& graph, const RewardParams& params,
                                    const ValueTable& table, LocationId origin,
                                    RandomStream& rng, std::size_t max_len = 0) {
  if (table.destination < 0) throw std::invalid_argument("value table has no destination");
  if (origin == table.destination) {
    Trajectory t;
    t.locations.push_back(origin);  // absorbing start: <d>
    return t;
  }
  if (table.values.at(origin) == -kInfinity)
    throw std::invalid_argument("destination unreachable from origin");
  if (max_len == 0) max_len = 4 * graph.size();

  constexpr int kMaxAttempts = 100;
  for (int attempt = 1; attempt <= kMaxAttempts; ++attempt) {
    Trajectory t;
    t.locations.push_back(origin);
    while (t.locations.back() != table.destination) {
      if (t.locations.size() >= max_len) break;
      const LocationId s = t.locations.back();
      const auto log_p = choice_log_probabilities(graph, params, table, s);
      t.locations.push_back(detail::sample_categorical(graph.successors(s), log_p, rng));
    }
    if (t.locations.back() == table.destination && t.locations.size() <= max_len) return t;
  }
  throw RetryCapExceeded("no trajectory within " + std::to_string(max_len) +
                         " locations after 100 attempts (origin " +
                         std::to_string(graph.sensor_id(origin)) + ", destination " +
                         std::to_string(graph.sensor_id(table.destination)) + ")");
}

namespace detail {

// Shared feasibility walk: throws WrongDestination / InfeasibleStep, returns
// false when an interior visit to the destination makes the probability zero.
inline bool check_trajectory(const SensorGraph& graph, const Trajectory& t,
                             LocationId destination) {
  if (t.locations.empty())
    throw std::invalid_argument("trajectory needs at least one location");
  if (t.destination() != destination)
    throw WrongDestination("trajectory ends at " +
                           std::to_string(graph.sensor_id(t.destination())) +
                           ", value table is for " +
                           std::to_string(graph.sensor_id(destination)));
  for (std::size_t i = 0; i + 1 < t.locations.size(); ++i) {
    if (graph.successor_index(t.locations[i], t.locations[i + 1]) < 0)
      throw InfeasibleStep("no edge " + std::to_string(graph.sensor_id(t.locations[i])) +
                           "->" + std::to_string(graph.sensor_id(t.locations[i + 1])));
    if (t.locations[i] == destination) return false;
  }
  return true;
}

}  // namespace detail

/// Exact log probability of a trajectory: the sum of per-step choice log
/// probabilities. Returns -inf when the model assigns probability zero (an
/// interior visit to the destination, or a step the values rule out).
inline double trajectory_log_prob(const SensorGraph& graph, const RewardParams& params,
                                  const ValueTable& table, const Trajectory& t) {
  if (!detail::check_trajectory(graph, t, table.destination)) return -kInfinity;
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < t.locations.size(); ++i) {
    const LocationId s = t.locations[i];
    if (table.values[s] == -kInfinity) return -kInfinity;
    const auto log_p = choice_log_probabilities(graph, params, table, s);
    const double lp = log_p[graph.successor_index(s, t.locations[i + 1])];
    if (lp == -kInfinity) return -kInfinity;
    acc += lp;
  }
  return acc;
}

/// Telescoped log probability, valid only for gamma = 1:
///
///   ln p(tau) = (sum_t r(s_t, s_{t+1}) - v(s_0)) / alpha.
///
/// Agrees with trajectory_log_prob up to solver tolerance; cheaper because it
/// needs no per-step normalization.
inline double trajectory_log_prob_simplified(const SensorGraph& graph,
                                             const RewardParams& params,
                                             const ValueTable& table, const Trajectory& t) {
  if (params.gamma != 1.0)
    throw GammaNotOne("the telescoped likelihood requires gamma = 1");
  if (!detail::check_trajectory(graph, t, table.destination)) return -kInfinity;
  if (table.values[t.origin()] == -kInfinity) return -kInfinity;
  double total_reward = 0.0;
  for (std::size_t i = 0; i + 1 < t.locations.size(); ++i)
    total_reward += reward(graph, params, t.locations[i], t.locations[i + 1]);
  return (total_reward - table.values[t.origin()]) / params.alpha;
}

}  // namespace ruirl
