// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ruirl/csv.hpp"
#include "ruirl/generative.hpp"
#include "ruirl/network.hpp"
#include "ruirl/random.hpp"
#include "ruirl/rucore.hpp"
#include "ruirl/trajectory.hpp"
#include "ruirl/types.hpp"

namespace ruirl {

using Beta = std::vector<double>;

/// Per-destination value tables with two slots: the committed tables always
/// match beta(), and a candidate slot holds solves for a proposed beta until
/// the proposal is accepted (commit) or dropped (discard). Candidate solves
/// warm-start from the committed tables, which are close for a local
/// proposal.
class ValueCache {
 public:
  explicit ValueCache(const SensorGraph& graph, SolverConfig config = {})
      : graph_(&graph), config_(config) {}

  const Beta& beta() const { return beta_; }

  /// Table for `destination` under `beta`, solving on demand. Asking for a
  /// beta other than the committed one opens (or reuses) the candidate slot.
  const ValueTable& get(LocationId destination, const Beta& beta) {
    if (beta_.empty() && candidate_.empty() && tables_.empty()) beta_ = beta;
    if (beta == beta_) {
      auto it = tables_.find(destination);
      if (it == tables_.end()) {
        RewardParams params;
        params.beta = beta_;
        it = tables_.emplace(destination, solve_value(*graph_, params, destination, config_))
                 .first;
      }
      return it->second;
    }
    if (beta != candidate_beta_) {
      candidate_.clear();
      candidate_beta_ = beta;
    }
    auto it = candidate_.find(destination);
    if (it == candidate_.end()) {
      RewardParams params;
      params.beta = candidate_beta_;
      auto warm = tables_.find(destination);
      it = candidate_
               .emplace(destination,
                        solve_value(*graph_, params, destination, config_,
                                    warm == tables_.end() ? nullptr : &warm->second))
               .first;
    }
    return it->second;
  }

  /// Promotes the candidate slot: its tables become the committed ones.
  /// No-op when no candidate is open.
  void commit_candidate() {
    if (candidate_beta_.empty()) return;
    for (auto& [d, table] : candidate_) tables_[d] = std::move(table);
    beta_ = candidate_beta_;
    candidate_.clear();
    candidate_beta_.clear();
  }

  void discard_candidate() {
    candidate_.clear();
    candidate_beta_.clear();
  }

  /// Committed tables, all solved for beta().
  const std::map<LocationId, ValueTable>& tables() const { return tables_; }
  const SolverConfig& config() const { return config_; }

 private:
  const SensorGraph* graph_;
  SolverConfig config_;
  Beta beta_;
  std::map<LocationId, ValueTable> tables_;
  Beta candidate_beta_;
  std::map<LocationId, ValueTable> candidate_;
};

/// Log likelihood of a corpus under beta (alpha = gamma = 1), telescoped
/// form, grouping table solves by destination. A trajectory the model cannot
/// produce makes the whole corpus impossible (-inf).
inline double log_likelihood(const SensorGraph& graph, const Beta& beta,
                             const Dataset& data, ValueCache& cache) {
  RewardParams params;
  params.beta = beta;
  params.validate();
  double acc = 0.0;
  for (const auto& t : data.trajectories) {
    if (t.locations.empty()) continue;
    const ValueTable& table = cache.get(t.destination(), beta);
    double lp;
    try {
      lp = trajectory_log_prob_simplified(graph, params, table, t);
    } catch (const InfeasibleStep&) {
      return -kInfinity;
    }
    if (lp == -kInfinity) return -kInfinity;
    acc += lp;
  }
  return acc;
}

namespace detail {

/// Sufficient statistics of a corpus for the alpha = gamma = 1 likelihood:
///
///   ln p(T | beta) = -sum_k beta_k T_k - sum_{d, s0} n(d, s0) v_beta_d(s0)
///
/// where T_k is the corpus-total of feature k over all steps and n(d, s0)
/// counts trajectories by destination and origin. Feasibility is structural
/// (independent of beta) and checked once here.
struct LikelihoodStats {
  std::array<double, kNumFeatures> feature_totals{};
  std::map<LocationId, std::map<LocationId, double>> origin_counts;  // d -> s0 -> n
  bool infeasible = false;
  std::size_t n_trajectories = 0;
};

inline LikelihoodStats likelihood_stats(const SensorGraph& graph, const Dataset& data) {
  LikelihoodStats stats;
  for (const auto& t : data.trajectories) {
    if (t.locations.empty()) continue;
    ++stats.n_trajectories;
    const LocationId d = t.destination();
    try {
      if (!check_trajectory(graph, t, d)) {
        stats.infeasible = true;  // interior visit to the own destination
        return stats;
      }
    } catch (const InfeasibleStep&) {
      stats.infeasible = true;
      return stats;
    }
    if (reachable_mask(graph, d)[t.origin()] == 0) {
      stats.infeasible = true;
      return stats;
    }
    for (std::size_t i = 0; i + 1 < t.locations.size(); ++i) {
      const auto& phi = graph.features(t.locations[i], t.locations[i + 1]);
      for (int k = 0; k < kNumFeatures; ++k) stats.feature_totals[k] += phi[k];
    }
    stats.origin_counts[d][t.origin()] += 1.0;
  }
  return stats;
}

inline double log_likelihood(const Beta& beta, const LikelihoodStats& stats,
                             ValueCache& cache) {
  if (stats.infeasible) return -kInfinity;
  double acc = 0.0;
  for (int k = 0; k < kNumFeatures; ++k) acc -= beta[k] * stats.feature_totals[k];
  for (const auto& [d, origins] : stats.origin_counts) {
    const ValueTable& table = cache.get(d, beta);
    for (const auto& [s0, n] : origins) {
      const double v = table.values[s0];
      if (v == -kInfinity) return -kInfinity;
      acc -= n * v;
    }
  }
  return acc;
}

}  // namespace detail

struct MHConfig {
  int n_iter = 10000;
  int burn_in = 2000;
  std::vector<double> proposal_sigmas = std::vector<double>(kNumFeatures, 0.1);
  int adapt_interval = 50;
  double target_accept = 0.30;
  std::uint64_t seed = 0;
  SolverConfig solver;

  void validate() const {
    if (n_iter < 1) throw ConfigError("n_iter must be >= 1");
    if (burn_in < 0 || burn_in >= n_iter)
      throw ConfigError("burn_in must lie in [0, n_iter)");
    if (proposal_sigmas.size() != static_cast<std::size_t>(kNumFeatures))
      throw ConfigError("proposal_sigmas must have " + std::to_string(kNumFeatures) +
                        " entries");
    for (double s : proposal_sigmas)
      if (s < 0 || !std::isfinite(s))
        throw ConfigError("proposal_sigmas entries must be finite and >= 0");
    if (adapt_interval < 1) throw ConfigError("adapt_interval must be >= 1");
    if (!(target_accept > 0) || !(target_accept < 1))
      throw ConfigError("target_accept must lie in (0, 1)");
  }
};

/// Current point of the random walk.
struct MHState {
  Beta beta;
  double log_posterior = -kInfinity;
  ValueCache* cache = nullptr;
};

namespace detail {

template <typename LogPosterior>
bool mh_step_impl(MHState& state, LogPosterior&& log_posterior,
                  std::span<const double> sigma, RandomStream& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Beta proposal(state.beta.size());
  bool negative = false;
  for (std::size_t k = 0; k < proposal.size(); ++k) {
    proposal[k] = state.beta[k] + sigma[k] * normal(rng);
    if (proposal[k] < 0) negative = true;
  }
  if (negative) return false;  // flat prior on [0, inf): density zero

  const double log_post = log_posterior(proposal);
  const double log_ratio = log_post - state.log_posterior;
  const bool accept = log_ratio >= 0 || uniform01(rng) < std::exp(log_ratio);
  if (accept) {
    state.cache->commit_candidate();
    state.beta = std::move(proposal);
    state.log_posterior = log_post;
  } else {
    state.cache->discard_candidate();
  }
  return accept;
}

}  // namespace detail

/// One Metropolis step with a diagonal Gaussian proposal and a flat prior on
/// [0, inf)^K: a proposal with any negative component is rejected outright,
/// otherwise accepted with probability min(1, exp(log_post' - log_post)).
/// A proposal whose value solve does not converge is rejected. On accept the
/// candidate value tables replace the committed ones. Returns whether the
/// proposal was accepted.
inline bool mh_step(MHState& state, const SensorGraph& graph, const Dataset& data,
                    std::span<const double> sigma, RandomStream& rng) {
  return detail::mh_step_impl(
      state,
      [&](const Beta& proposal) {
        try {
          return log_likelihood(graph, proposal, data, *state.cache);
        } catch (const MaxIterationsExceeded&) {
        } catch (const Diverged&) {
        }
        state.cache->discard_candidate();
        return -kInfinity;
      },
      sigma, rng);
}

/// Full random-walk history. samples[0] is the initial point; accepted[i]
/// records whether step i moved (accepted[0] is false by convention).
struct PosteriorChain {
  std::vector<Beta> samples;
  std::vector<double> log_posteriors;
  std::vector<char> accepted;
  MHConfig config;

  std::size_t size() const { return samples.size(); }

  double acceptance_rate(std::size_t from = 1) const {
    if (from >= accepted.size()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = from; i < accepted.size(); ++i) acc += accepted[i] ? 1.0 : 0.0;
    return acc / static_cast<double>(accepted.size() - from);
  }

  double post_burn_in_acceptance_rate() const {
    return acceptance_rate(static_cast<std::size_t>(config.burn_in) + 1);
  }

  /// Posterior mean of component k over the post-burn-in samples.
  double posterior_mean(int k) const {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = static_cast<std::size_t>(config.burn_in) + 1; i < samples.size();
         ++i, ++n)
      acc += samples[i][k];
    return n == 0 ? 0.0 : acc / static_cast<double>(n);
  }

  double posterior_sd(int k) const {
    const double mean = posterior_mean(k);
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = static_cast<std::size_t>(config.burn_in) + 1; i < samples.size();
         ++i, ++n) {
      const double d = samples[i][k] - mean;
      acc += d * d;
    }
    return n < 2 ? 0.0 : std::sqrt(acc / static_cast<double>(n - 1));
  }

  /// Central interval [lo, hi] of component k over post-burn-in samples,
  /// e.g. level 0.95 takes the 2.5% and 97.5% empirical quantiles.
  std::pair<double, double> central_interval(int k, double level) const {
    std::vector<double> xs;
    for (std::size_t i = static_cast<std::size_t>(config.burn_in) + 1; i < samples.size();
         ++i)
      xs.push_back(samples[i][k]);
    if (xs.empty()) throw EmptyInput("no post-burn-in samples");
    std::sort(xs.begin(), xs.end());
    const double tail = (1.0 - level) / 2.0;
    const auto at = [&xs](double q) {
      const double pos = q * static_cast<double>(xs.size() - 1);
      const std::size_t i = static_cast<std::size_t>(pos);
      const double frac = pos - static_cast<double>(i);
      return i + 1 < xs.size() ? xs[i] * (1.0 - frac) + xs[i + 1] * frac : xs.back();
    };
    return {at(tail), at(1.0 - tail)};
  }
};

/// Runs the random-walk sampler for n_iter steps from `init`. Proposal
/// scales adapt during burn-in only (multiplied by exp(+-0.1) toward the
/// target acceptance rate every adapt_interval steps), then stay fixed so
/// the post-burn-in chain is a time-homogeneous Metropolis chain. Proposals
/// whose value solve does not converge are rejected; if the initial point
/// itself cannot be solved the fit fails with NonFiniteInit.
inline PosteriorChain run_mh(const SensorGraph& graph, const Dataset& data,
                             const MHConfig& config, const Beta& init) {
  config.validate();
  if (data.trajectories.empty()) throw EmptyInput("no trajectories to fit");
  RewardParams check;
  check.beta = init;
  check.validate();

  const detail::LikelihoodStats stats = detail::likelihood_stats(graph, data);
  ValueCache cache(graph, config.solver);
  // A beta whose value solve does not converge has a divergent path
  // partition; the corpus gets probability zero there and the move is
  // rejected, mirroring grid_init.
  auto log_posterior = [&](const Beta& beta) {
    try {
      return detail::log_likelihood(beta, stats, cache);
    } catch (const MaxIterationsExceeded&) {
    } catch (const Diverged&) {
    }
    cache.discard_candidate();
    return -kInfinity;
  };

  MHState state;
  state.beta = init;
  state.cache = &cache;
  state.log_posterior = log_posterior(init);
  cache.commit_candidate();
  if (state.log_posterior == -kInfinity)
    throw NonFiniteInit("initial beta assigns probability zero to the data");

  RandomStream rng = substream(config.seed, "mh");
  std::vector<double> sigma = config.proposal_sigmas;

  PosteriorChain chain;
  chain.config = config;
  chain.samples.reserve(config.n_iter + 1);
  chain.samples.push_back(state.beta);
  chain.log_posteriors.push_back(state.log_posterior);
  chain.accepted.push_back(0);

  int window_accepts = 0;
  for (int iter = 1; iter <= config.n_iter; ++iter) {
    const bool accepted = detail::mh_step_impl(state, log_posterior, sigma, rng);
    chain.samples.push_back(state.beta);
    chain.log_posteriors.push_back(state.log_posterior);
    chain.accepted.push_back(accepted ? 1 : 0);
    window_accepts += accepted ? 1 : 0;
    if (iter <= config.burn_in && iter % config.adapt_interval == 0) {
      const double rate =
          static_cast<double>(window_accepts) / static_cast<double>(config.adapt_interval);
      const double factor = rate > config.target_accept ? std::exp(0.1) : std::exp(-0.1);
      for (double& s : sigma) s *= factor;
      window_accepts = 0;
    }
  }
  chain.config.proposal_sigmas = sigma;  // final (post-adaptation) scales
  return chain;
}

/// Coarse likelihood maximization over candidate betas; replaces a fancier
/// starting-point search. Ties keep the earliest candidate. A candidate whose
/// value solve does not converge (e.g. beta = 0 on a cyclic graph) counts as
/// -inf and is never selected. Throws AllInfeasible when every candidate
/// assigns the corpus probability zero.
inline Beta grid_init(const SensorGraph& graph, const Dataset& data,
                      const std::vector<Beta>& candidates, const SolverConfig& config = {}) {
  if (candidates.empty()) throw EmptyInput("grid_init needs at least one candidate");
  const detail::LikelihoodStats stats = detail::likelihood_stats(graph, data);
  ValueCache cache(graph, config);
  double best = -kInfinity;
  Beta best_beta;
  for (const auto& beta : candidates) {
    RewardParams check;
    check.beta = beta;
    check.validate();
    double ll = -kInfinity;
    try {
      ll = detail::log_likelihood(beta, stats, cache);
    } catch (const MaxIterationsExceeded&) {
    } catch (const Diverged&) {
    }
    cache.discard_candidate();
    if (ll > best) {
      best = ll;
      best_beta = beta;
    }
  }
  if (best == -kInfinity)
    throw AllInfeasible("every candidate beta assigns the corpus probability zero");
  return best_beta;
}

inline std::string posterior_header() {
  std::string header = "iter";
  for (int k = 1; k <= kNumFeatures; ++k) header += ",beta_" + std::to_string(k);
  header += ",log_posterior,accepted";
  return header;
}

inline void write_posterior_csv(const PosteriorChain& chain, const std::string& path) {
  csv::Writer w(path, posterior_header());
  for (std::size_t i = 0; i < chain.samples.size(); ++i) {
    w.field(static_cast<std::int64_t>(i));
    for (int k = 0; k < kNumFeatures; ++k) w.field(chain.samples[i][k]);
    w.field(chain.log_posteriors[i]).field(static_cast<std::int64_t>(chain.accepted[i]));
    w.end_row();
  }
}

/// Reads a posterior written by write_posterior_csv. The chain's MHConfig is
/// not stored in the file; pass the burn-in so downstream thinning knows
/// where the retained samples start.
inline PosteriorChain read_posterior_csv(const std::string& path, int burn_in = 0) {
  csv::Reader reader(path, posterior_header());
  PosteriorChain chain;
  std::vector<std::string> f;
  while (reader.next(f)) {
    reader.require_fields(f, 3 + kNumFeatures);
    Beta beta(kNumFeatures);
    for (int k = 0; k < kNumFeatures; ++k) beta[k] = reader.to_double(f[1 + k]);
    chain.samples.push_back(std::move(beta));
    chain.log_posteriors.push_back(csv::parse_value_or_inf(reader, f[1 + kNumFeatures]));
    chain.accepted.push_back(reader.to_int(f[2 + kNumFeatures]) != 0 ? 1 : 0);
  }
  if (chain.samples.empty()) throw EmptyInput("posterior file " + path + " has no rows");
  chain.config.burn_in = burn_in;
  chain.config.n_iter = static_cast<int>(chain.samples.size()) - 1;
  return chain;
}

}  // namespace ruirl
