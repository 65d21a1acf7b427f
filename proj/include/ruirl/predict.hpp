// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ruirl/generative.hpp"
#include "ruirl/inference.hpp"
#include "ruirl/network.hpp"
#include "ruirl/rucore.hpp"
#include "ruirl/trajectory.hpp"
#include "ruirl/types.hpp"

namespace ruirl {

/// Informed: empirical p(d | s_0) from the training corpus. Uninformed:
/// uniform over the training destinations.
enum class PriorMode { kInformed, kUninformed };

/// Destination prior used when marginalizing predictions over the unknown
/// destination.
class DestinationPrior {
 public:
  DestinationPrior(std::vector<LocationId> destinations, PriorMode mode,
                   std::map<std::pair<LocationId, LocationId>, double> origin_counts)
      : destinations_(std::move(destinations)), mode_(mode) {
    if (destinations_.empty()) throw EmptyInput("destination prior over an empty set");
    if (mode_ == PriorMode::kInformed) {
      std::map<LocationId, double> totals;
      for (const auto& [od, c] : origin_counts) totals[od.first] += c;
      for (const auto& [od, c] : origin_counts)
        conditional_[od.first].emplace_back(od.second, c / totals[od.first]);
    }
  }

  const std::vector<LocationId>& destinations() const { return destinations_; }

  /// p(d | origin) for each destination in destinations() order.
  std::vector<double> probs_for_origin(LocationId origin) const {
    const double uniform = 1.0 / static_cast<double>(destinations_.size());
    std::vector<double> probs(destinations_.size(), uniform);
    if (mode_ == PriorMode::kUninformed) return probs;
    auto it = conditional_.find(origin);
    if (it == conditional_.end()) return probs;  // unseen origin: fall back
    std::fill(probs.begin(), probs.end(), 0.0);
    for (const auto& [d, p] : it->second) {
      const auto pos =
          std::lower_bound(destinations_.begin(), destinations_.end(), d) -
          destinations_.begin();
      probs[pos] = p;
    }
    return probs;
  }

 private:
  std::vector<LocationId> destinations_;  // ascending
  PriorMode mode_;
  std::map<LocationId, std::vector<std::pair<LocationId, double>>> conditional_;
};

inline DestinationPrior build_destination_prior(const Dataset& train, PriorMode mode) {
  std::map<std::pair<LocationId, LocationId>, double> counts;
  for (const auto& t : train.trajectories) {
    if (t.size() < 2) continue;
    counts[{t.origin(), t.destination()}] += 1.0;
  }
  if (counts.empty()) throw EmptyInput("training corpus has no usable trips");
  std::vector<LocationId> dests;
  for (const auto& [od, c] : counts) dests.push_back(od.second);
  std::sort(dests.begin(), dests.end());
  dests.erase(std::unique(dests.begin(), dests.end()), dests.end());
  return DestinationPrior(std::move(dests), mode, std::move(counts));
}

/// Everything needed to predict online: thinned posterior draws of beta with
/// the matching value tables (one per draw and destination) and a
/// destination prior. Building this is the expensive step; prediction itself
/// is a table lookup.
class PredictorState {
 public:
  /// Takes every `thin`-th post-burn-in sample, up to max_samples, dedupes
  /// repeated points of the chain, and solves the value tables for every
  /// (draw, training destination) pair.
  static PredictorState build(const SensorGraph& graph, const PosteriorChain& chain,
                              const Dataset& train, PriorMode mode, int thin = 10,
                              int max_samples = 100, const SolverConfig& solver = {}) {
    if (thin < 1) throw ConfigError("thin must be >= 1");
    if (max_samples < 1) throw ConfigError("max_samples must be >= 1");
    std::vector<Beta> draws;
    const std::size_t first = static_cast<std::size_t>(chain.config.burn_in) + 1;
    for (std::size_t i = first; i < chain.samples.size() &&
                                draws.size() < static_cast<std::size_t>(max_samples);
         i += static_cast<std::size_t>(thin))
      draws.push_back(chain.samples[i]);
    if (draws.empty()) throw EmptyInput("chain has no post-burn-in samples");
    return from_samples(graph, draws, train, mode, solver);
  }

  /// Direct construction from explicit beta draws (duplicates are collapsed
  /// and weighted by multiplicity).
  static PredictorState from_samples(const SensorGraph& graph, const std::vector<Beta>& draws,
                                     const Dataset& train, PriorMode mode,
                                     const SolverConfig& solver = {}) {
    if (draws.empty()) throw EmptyInput("no posterior draws given");
    PredictorState state;
    state.graph_ = &graph;
    state.prior_ = build_destination_prior(train, mode);

    std::map<Beta, int> multiplicity;
    for (const auto& b : draws) ++multiplicity[b];
    for (const auto& [beta, count] : multiplicity) {
      state.betas_.push_back(beta);
      state.weights_.push_back(static_cast<double>(count) /
                               static_cast<double>(draws.size()));
    }

    // Solve per (destination, draw); consecutive draws are close, so each
    // destination's previous table makes a good warm start.
    const auto& dests = state.prior_->destinations();
    state.log_next_.resize(state.betas_.size());
    for (auto& per_dest : state.log_next_) per_dest.resize(dests.size());
    for (std::size_t j = 0; j < dests.size(); ++j) {
      ValueTable warm;
      for (std::size_t i = 0; i < state.betas_.size(); ++i) {
        RewardParams params;
        params.beta = state.betas_[i];
        warm = solve_value(graph, params, dests[j], solver,
                           warm.values.empty() ? nullptr : &warm);
        state.log_next_[i][j] = per_state_rows(graph, params, warm);
      }
    }
    return state;
  }

  const DestinationPrior& prior() const { return *prior_; }
  const std::vector<Beta>& betas() const { return betas_; }

  /// Posterior-predictive distribution of the next location given the
  /// observed prefix: successor order of A_{s_t}, normalized. Each (draw,
  /// destination) component is weighted by its draw weight, the destination
  /// prior at the prefix origin, and the probability of the prefix itself;
  /// a destination already visited by the prefix gets weight zero. Throws
  /// AllWeightsZero when no component can produce the prefix.
  std::vector<double> predictive_next_prob(const Trajectory& prefix) const {
    if (prefix.locations.empty()) throw EmptyInput("empty prefix");
    const LocationId current = prefix.locations.back();
    const auto& succ = graph_->successors(current);
    if (succ.empty())
      throw NoFeasibleSuccessor("location " +
                                std::to_string(graph_->sensor_id(current)) +
                                " has no successors");

    const auto& dests = prior_->destinations();
    const auto prior_probs = prior_->probs_for_origin(prefix.origin());

    std::vector<double> log_weights;   // per live (i, d) component
    std::vector<std::size_t> comp_i, comp_d;
    for (std::size_t i = 0; i < betas_.size(); ++i) {
      for (std::size_t j = 0; j < dests.size(); ++j) {
        if (prior_probs[j] == 0.0) continue;
        double lw = std::log(weights_[i]) + std::log(prior_probs[j]);
        bool dead = false;
        for (std::size_t t = 0; t + 1 < prefix.locations.size() && !dead; ++t) {
          if (prefix.locations[t] == dests[j]) {
            dead = true;  // destination reached mid-prefix: impossible
            break;
          }
          const double lp = log_next_prob(i, j, prefix.locations[t], prefix.locations[t + 1]);
          if (lp == -kInfinity) dead = true;
          lw += lp;
        }
        // A prefix currently standing on d has already terminated under d.
        if (!dead && prefix.locations.size() > 1 && current == dests[j]) dead = true;
        if (dead || lw == -kInfinity) continue;
        log_weights.push_back(lw);
        comp_i.push_back(i);
        comp_d.push_back(j);
      }
    }
    if (log_weights.empty())
      throw AllWeightsZero("no posterior component assigns the prefix positive probability");

    const double shift = *std::max_element(log_weights.begin(), log_weights.end());
    std::vector<double> next(succ.size(), 0.0);
    for (std::size_t c = 0; c < log_weights.size(); ++c) {
      const double w = std::exp(log_weights[c] - shift);
      const auto& row = log_next_[comp_i[c]][comp_d[c]][current];
      if (row.empty()) continue;
      for (std::size_t a = 0; a < succ.size(); ++a)
        if (row[a] != -kInfinity) next[a] += w * std::exp(row[a]);
    }
    double total = 0.0;
    for (double p : next) total += p;
    if (!(total > 0))
      throw AllWeightsZero("prefix has positive probability but no continuation");
    for (double& p : next) p /= total;
    return next;
  }

  /// Most probable next location; ties go to the smaller id.
  LocationId predict_next(const Trajectory& prefix) const {
    const auto probs = predictive_next_prob(prefix);
    const auto& succ = graph_->successors(prefix.locations.back());
    std::size_t best = 0;
    for (std::size_t a = 1; a < probs.size(); ++a)
      if (probs[a] > probs[best]) best = a;
    return succ[best];
  }

  double prob_of(const Trajectory& prefix, LocationId next) const {
    const auto probs = predictive_next_prob(prefix);
    const int a = graph_->successor_index(prefix.locations.back(), next);
    return a < 0 ? 0.0 : probs[a];
  }

 private:
  PredictorState() = default;

  // log p(s2 | s) for draw i and destination index j; -inf when impossible.
  double log_next_prob(std::size_t i, std::size_t j, LocationId s, LocationId s2) const {
    const auto& row = log_next_[i][j][s];
    if (row.empty()) return -kInfinity;
    const int a = graph_->successor_index(s, s2);
    return a < 0 ? -kInfinity : row[a];
  }

  /// Per-state successor log-probability rows for one (draw, destination)
  /// table. States with no feasible continuation get an empty row instead of
  /// throwing; they simply contribute probability zero.
  static std::vector<std::vector<double>> per_state_rows(const SensorGraph& graph,
                                                         const RewardParams& params,
                                                         const ValueTable& table) {
    std::vector<std::vector<double>> rows(graph.size());
    for (LocationId s = 0; s < static_cast<LocationId>(graph.size()); ++s) {
      if (s == table.destination) continue;  // terminal: no continuation
      if (table.values[s] == -kInfinity) continue;
      rows[s] = choice_log_probabilities(graph, params, table, s);
    }
    return rows;
  }

  const SensorGraph* graph_ = nullptr;
  std::optional<DestinationPrior> prior_;
  std::vector<Beta> betas_;
  std::vector<double> weights_;
  // log_next_[draw][dest_index][state][successor_index]
  std::vector<std::vector<std::vector<std::vector<double>>>> log_next_;
};

}  // namespace ruirl
