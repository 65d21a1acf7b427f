// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ruirl/csv.hpp"
#include "ruirl/network.hpp"
#include "ruirl/random.hpp"
#include "ruirl/trajectory.hpp"
#include "ruirl/types.hpp"

namespace ruirl {

enum class Metric { kDistance, kTime };

/// Nearest-neighbor heuristic: always move to the successor with the
/// smallest feature value (distance or time); ties go to the smaller id.
inline LocationId nn_predict(const SensorGraph& graph, LocationId s, Metric metric) {
  const auto& succ = graph.successors(s);
  if (succ.empty())
    throw NoSuccessor("location " + std::to_string(graph.sensor_id(s)) +
                      " has no successors");
  const auto& feat = graph.feature_row(s);
  const int k = metric == Metric::kDistance ? 0 : 1;
  std::size_t best = 0;
  for (std::size_t i = 1; i < succ.size(); ++i)
    if (feat[i][k] < feat[best][k]) best = i;
  return succ[best];
}

/// First-order Markov model: empirical transition counts over observed
/// consecutive pairs, including pairs that are not sensor-graph edges.
struct MarkovModel {
  std::map<std::pair<LocationId, LocationId>, double> counts;
  std::map<LocationId, double> row_totals;
};

inline MarkovModel markov_fit(const Dataset& data) {
  MarkovModel model;
  for (const auto& t : data.trajectories) {
    for (std::size_t i = 0; i + 1 < t.locations.size(); ++i) {
      model.counts[{t.locations[i], t.locations[i + 1]}] += 1.0;
      model.row_totals[t.locations[i]] += 1.0;
    }
  }
  return model;
}

/// Number of observed transitions that are not sensor-graph edges.
inline std::size_t off_graph_count(const MarkovModel& model, const SensorGraph& graph) {
  std::size_t n = 0;
  for (const auto& [edge, c] : model.counts)
    if (graph.successor_index(edge.first, edge.second) < 0) ++n;
  return n;
}

/// Most frequent observed continuation of s; ties go to the smaller id
/// (std::map order). A state never seen in training falls back to the
/// nearest-neighbor-by-distance rule.
inline LocationId markov_predict(const MarkovModel& model, const SensorGraph& graph,
                                 LocationId s) {
  auto lo = model.counts.lower_bound({s, std::numeric_limits<LocationId>::min()});
  double best_count = 0.0;
  LocationId best = -1;
  for (auto it = lo; it != model.counts.end() && it->first.first == s; ++it) {
    if (it->second > best_count) {
      best_count = it->second;
      best = it->first.second;
    }
  }
  if (best < 0) return nn_predict(graph, s, Metric::kDistance);
  return best;
}

/// Uniform draw among the min(10, |A_s|) nearest successors by distance.
inline LocationId random_predict(const SensorGraph& graph, LocationId s,
                                 RandomStream& rng) {
  const auto& succ = graph.successors(s);
  if (succ.empty())
    throw NoSuccessor("location " + std::to_string(graph.sensor_id(s)) +
                      " has no successors");
  const auto& feat = graph.feature_row(s);
  std::vector<std::size_t> order(succ.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (feat[a][0] != feat[b][0]) return feat[a][0] < feat[b][0];
    return succ[a] < succ[b];
  });
  const std::size_t pool = std::min<std::size_t>(10, order.size());
  const std::size_t pick =
      std::min(pool - 1, static_cast<std::size_t>(uniform01(rng) * pool));
  return succ[order[pick]];
}

inline void save_markov_model(const MarkovModel& model, const SensorGraph& graph,
                              const std::string& path) {
  csv::Writer w(path, "from_sensor,to_sensor,count");
  for (const auto& [edge, c] : model.counts) {
    w.field(graph.sensor_id(edge.first)).field(graph.sensor_id(edge.second)).field(c);
    w.end_row();
  }
}

inline MarkovModel load_markov_model(const SensorGraph& graph, const std::string& path) {
  csv::Reader reader(path, "from_sensor,to_sensor,count");
  MarkovModel model;
  std::vector<std::string> f;
  while (reader.next(f)) {
    reader.require_fields(f, 3);
    const LocationId from = graph.index_of(reader.to_int(f[0]));
    const LocationId to = graph.index_of(reader.to_int(f[1]));
    const double c = reader.to_double(f[2]);
    if (c < 0) reader.fail("negative count");
    model.counts[{from, to}] += c;
    model.row_totals[from] += c;
  }
  return model;
}

}  // namespace ruirl
