// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ruirl/csv.hpp"
#include "ruirl/network.hpp"
#include "ruirl/random.hpp"
#include "ruirl/types.hpp"

namespace ruirl {

inline constexpr double kEulerMascheroni = 0.5772156649015328606;

/// Parameters of the random-utility model. Rewards are negated weighted
/// feature sums, r(s,s') = -(phi(s,s') . beta), alpha is the Gumbel noise
/// scale and gamma the discount factor.
struct RewardParams {
  double alpha = 1.0;
  std::vector<double> beta = std::vector<double>(kNumFeatures, 1.0);
  double gamma = 1.0;

  void validate() const {
    if (!(alpha > 0) || !std::isfinite(alpha))
      throw std::invalid_argument("alpha must be finite and > 0");
    if (beta.size() != static_cast<std::size_t>(kNumFeatures))
      throw std::invalid_argument("beta must have " + std::to_string(kNumFeatures) +
                                  " entries");
    for (double b : beta)
      if (b < 0 || !std::isfinite(b))
        throw std::invalid_argument("beta entries must be finite and >= 0");
    if (!(gamma > 0) || gamma > 1 || !std::isfinite(gamma))
      throw std::invalid_argument("gamma must lie in (0, 1]");
  }
};

struct SolverConfig {
  double tolerance = 1e-8;
  int max_iterations = 10000;
};

/// Converged value function for one destination, plus solve diagnostics.
struct ValueTable {
  LocationId destination = -1;
  std::vector<double> values;  // -inf where the destination is unreachable
  double residual = 0.0;
  int iterations = 0;
  double tolerance = 0.0;
  std::vector<double> residual_history;  // sup-norm change per sweep

  double value(LocationId s) const { return values.at(s); }
};

/// Soft maximum alpha * ln sum_i exp(x_i / alpha), the expected maximum of
/// Gumbel-perturbed values, evaluated with the usual max shift. Returns -inf
/// iff every entry is -inf; throws EmptyInput on an empty span.
inline double logsumexp(std::span<const double> xs, double alpha = 1.0) {
  if (xs.empty()) throw EmptyInput("logsumexp of an empty set");
  double m = -kInfinity;
  for (double x : xs) m = std::max(m, x / alpha);
  if (m == -kInfinity) return -kInfinity;
  if (m == kInfinity) return kInfinity;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x / alpha - m);
  return alpha * (m + std::log(acc));
}

/// One-step reward r(s,s') = -(phi(s,s') . beta). Throws NotASuccessor when
/// the edge does not exist.
inline double reward(const SensorGraph& graph, const RewardParams& params, LocationId s,
                     LocationId s2) {
  const auto& phi = graph.features(s, s2);
  double acc = 0.0;
  for (int k = 0; k < kNumFeatures; ++k) acc -= phi[k] * params.beta[k];
  return acc;
}

/// Solves the soft Bellman fixed point for destination d:
///
///   v(d) = 0
///   v(s) = alpha * ln sum_{s' in A_s} exp((r(s,s') + gamma v(s')) / alpha)
///
/// by Jacobi sweeps in ascending id order over the states from which d is
/// reachable, stopping when the sup-norm change drops below the tolerance.
/// States that cannot reach d keep v = -inf. A warm start (e.g. the table of
/// a nearby parameter value) seeds the iteration but never changes the
/// converged answer.
inline ValueTable solve_value(const SensorGraph& graph, const RewardParams& params,
                              LocationId destination, const SolverConfig& config = {},
                              const ValueTable* warm_start = nullptr) {
  params.validate();
  if (!(config.tolerance > 0)) throw ConfigError("solver tolerance must be > 0");
  if (config.max_iterations < 1) throw ConfigError("solver max_iterations must be >= 1");

  const std::size_t n = graph.size();
  const auto mask = detail::reachable_mask(graph, destination);

  std::vector<LocationId> sweep;  // reachable states other than d, ascending
  for (LocationId s = 0; s < static_cast<LocationId>(n); ++s)
    if (mask[s] && s != destination) sweep.push_back(s);

  ValueTable table;
  table.destination = destination;
  table.tolerance = config.tolerance;
  table.values.assign(n, -kInfinity);
  table.values[destination] = 0.0;
  for (LocationId s : sweep) {
    table.values[s] = 0.0;
    if (warm_start != nullptr && warm_start->values.size() == n &&
        std::isfinite(warm_start->values[s]))
      table.values[s] = warm_start->values[s];
  }

  std::vector<double> next = table.values;
  std::vector<double> terms;
  double previous_residual = kInfinity;
  int rising = 0;
  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    double residual = 0.0;
    for (LocationId s : sweep) {
      const auto& succ = graph.successors(s);
      const auto& feat = graph.feature_row(s);
      terms.clear();
      for (std::size_t i = 0; i < succ.size(); ++i) {
        const double v = table.values[succ[i]];
        if (v == -kInfinity) continue;
        double r = 0.0;
        for (int k = 0; k < kNumFeatures; ++k) r -= feat[i][k] * params.beta[k];
        terms.push_back(r + params.gamma * v);
      }
      const double updated = logsumexp(terms, params.alpha);
      residual = std::max(residual, std::abs(updated - table.values[s]));
      next[s] = updated;
    }
    std::swap(table.values, next);
    table.iterations = iter;
    table.residual = residual;
    table.residual_history.push_back(residual);
    if (std::isnan(residual))
      throw Diverged("value iteration produced a NaN residual for destination " +
                     std::to_string(graph.sensor_id(destination)));
    if (residual < config.tolerance) return table;
    rising = residual > previous_residual ? rising + 1 : 0;
    if (rising >= 100 || residual == kInfinity)
      throw Diverged("value iteration diverging for destination " +
                     std::to_string(graph.sensor_id(destination)) + " (residual " +
                     std::to_string(residual) + ")");
    previous_residual = residual;
  }
  throw MaxIterationsExceeded("value iteration for destination " +
                              std::to_string(graph.sensor_id(destination)) +
                              " still at residual " + std::to_string(table.residual) +
                              " after " + std::to_string(config.max_iterations) +
                              " sweeps");
}

/// Log choice probabilities over A_s under the converged values:
/// ln p(s'|s) proportional to (r(s,s') + gamma v(s')) / alpha, normalized.
/// Entries for successors that cannot reach the destination are -inf. Throws
/// NoFeasibleSuccessor when no successor leads to the destination.
inline std::vector<double> choice_log_probabilities(const SensorGraph& graph,
                                                    const RewardParams& params,
                                                    const ValueTable& table, LocationId s) {
  const auto& succ = graph.successors(s);
  const auto& feat = graph.feature_row(s);
  if (succ.empty())
    throw NoFeasibleSuccessor("location " + std::to_string(graph.sensor_id(s)) +
                              " has no successors");
  std::vector<double> scores(succ.size(), -kInfinity);
  double m = -kInfinity;
  for (std::size_t i = 0; i < succ.size(); ++i) {
    const double v = table.values[succ[i]];
    if (v == -kInfinity) continue;
    double r = 0.0;
    for (int k = 0; k < kNumFeatures; ++k) r -= feat[i][k] * params.beta[k];
    scores[i] = (r + params.gamma * v) / params.alpha;
    m = std::max(m, scores[i]);
  }
  if (m == -kInfinity)
    throw NoFeasibleSuccessor("no successor of " + std::to_string(graph.sensor_id(s)) +
                              " reaches the destination");
  double acc = 0.0;
  for (double sc : scores)
    if (sc != -kInfinity) acc += std::exp(sc - m);
  const double log_z = m + std::log(acc);
  for (double& sc : scores)
    if (sc != -kInfinity) sc -= log_z;
  return scores;
}

inline std::vector<double> choice_probabilities(const SensorGraph& graph,
                                                const RewardParams& params,
                                                const ValueTable& table, LocationId s) {
  auto log_p = choice_log_probabilities(graph, params, table, s);
  double total = 0.0;
  for (double& lp : log_p) {
    lp = lp == -kInfinity ? 0.0 : std::exp(lp);
    total += lp;
  }
  for (double& p : log_p) p /= total;
  return log_p;
}

inline void save_value_table(const SensorGraph& graph, const ValueTable& table,
                             const std::string& path) {
  csv::Writer w(path, "sensor_id,value");
  for (LocationId s = 0; s < static_cast<LocationId>(graph.size()); ++s) {
    w.field(graph.sensor_id(s)).field(table.values[s]);
    w.end_row();
  }
}

/// Loads a value table written by save_value_table. The destination is not
/// stored in the file (there is one file per destination); pass it in.
inline ValueTable load_value_table(const SensorGraph& graph, const std::string& path,
                                   LocationId destination = -1) {
  csv::Reader reader(path, "sensor_id,value");
  ValueTable table;
  table.destination = destination;
  table.values.assign(graph.size(), -kInfinity);
  std::vector<std::string> f;
  while (reader.next(f)) {
    reader.require_fields(f, 2);
    table.values.at(graph.index_of(reader.to_int(f[0]))) =
        csv::parse_value_or_inf(reader, f[1]);
  }
  return table;
}

/// Draw from Gumbel(location, scale) by inversion.
inline double gumbel_sample(double location, double scale, RandomStream& rng) {
  if (!(scale > 0)) throw std::invalid_argument("gumbel scale must be > 0");
  return location - scale * std::log(-std::log(uniform01(rng)));
}

/// Draw from the zero-mean Gumbel with scale alpha, i.e. location
/// -alpha * EulerMascheroni. This is the utility noise epsilon of the model.
inline double gumbel_sample_zero_mean(double alpha, RandomStream& rng) {
  return gumbel_sample(-alpha * kEulerMascheroni, alpha, rng);
}

}  // namespace ruirl
