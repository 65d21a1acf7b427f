// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <queue>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ruirl/csv.hpp"
#include "ruirl/network.hpp"
#include "ruirl/random.hpp"
#include "ruirl/trajectory.hpp"
#include "ruirl/types.hpp"

namespace ruirl {

/// Splits raw detection streams into trips: a gap longer than cutoff_min
/// minutes starts a new trip, and trips shorter than min_len detections are
/// dropped. Requires timestamps.
inline Dataset split_trips(const Dataset& raw, double cutoff_min = 30.0,
                           std::size_t min_len = 6) {
  Dataset out;
  std::int64_t next_id = 0;
  for (const auto& stream : raw.trajectories) {
    if (!stream.timestamps.has_value())
      throw MissingTimestamps("trip " + std::to_string(stream.trip_id) +
                              " has no timestamps; cannot split");
    const auto& ts = *stream.timestamps;
    std::size_t start = 0;
    auto flush = [&](std::size_t end) {
      if (end - start >= min_len) {
        Trajectory t;
        t.trip_id = next_id++;
        t.locations.assign(stream.locations.begin() + start, stream.locations.begin() + end);
        t.timestamps.emplace(ts.begin() + start, ts.begin() + end);
        out.trajectories.push_back(std::move(t));
      }
      start = end;
    };
    for (std::size_t i = 1; i < stream.locations.size(); ++i)
      if ((ts[i] - ts[i - 1]) / 60.0 > cutoff_min) flush(i);
    flush(stream.locations.size());
  }
  return out;
}

/// Deterministic shuffle split. n_train = floor(ratio * n + 0.5).
inline std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double ratio,
                                                    std::uint64_t seed) {
  if (!(ratio > 0) || !(ratio < 1)) throw ConfigError("split ratio must lie in (0, 1)");
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  RandomStream rng = substream(seed, "train_test_split");
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train =
      static_cast<std::size_t>(std::floor(ratio * static_cast<double>(data.size()) + 0.5));
  std::pair<Dataset, Dataset> split;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& side = i < n_train ? split.first : split.second;
    side.trajectories.push_back(data.trajectories[order[i]]);
  }
  return split;
}

/// A predictor maps an observed prefix to the next location. Throwing counts
/// as a miss.
using NextLocationPredictor = std::function<LocationId(const Trajectory&)>;

/// Predictor variant that also reports the probability it assigns to its
/// prediction (used for predictions.csv).
using ProbedPredictor = std::function<std::pair<LocationId, double>(const Trajectory&)>;

/// Road distance between two locations [km], for the near-miss metrics.
using DistanceFn = std::function<double(LocationId, LocationId)>;

/// Distance function over the sensor graph: the derived pairwise matrix when
/// present, otherwise memoized shortest paths over the graph's own edges.
inline DistanceFn sensor_distance_fn(const SensorGraph& graph) {
  if (graph.has_pairwise_distances())
    return [&graph](LocationId a, LocationId b) { return graph.pairwise_km(a, b); };
  auto cache = std::make_shared<std::map<LocationId, std::vector<double>>>();
  return [&graph, cache](LocationId a, LocationId b) {
    auto it = cache->find(a);
    if (it == cache->end()) {
      std::vector<double> dist(graph.size(), kInfinity);
      using Item = std::pair<double, LocationId>;
      std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
      dist[a] = 0.0;
      heap.emplace(0.0, a);
      while (!heap.empty()) {
        auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        const auto& succ = graph.successors(u);
        const auto& feat = graph.feature_row(u);
        for (std::size_t i = 0; i < succ.size(); ++i) {
          const double nd = d + feat[i][0];
          if (nd < dist[succ[i]]) {
            dist[succ[i]] = nd;
            heap.emplace(nd, succ[i]);
          }
        }
      }
      it = cache->emplace(a, std::move(dist)).first;
    }
    return it->second[b];
  };
}

struct EvalResult {
  std::string method;
  double acc = 0.0;     // exact hits [%]
  double acc_05 = 0.0;  // within 0.5 km [%]
  double acc_10 = 0.0;  // within 1.0 km [%]
  std::size_t n_predictions = 0;
  std::size_t n_trajectories = 0;
};

struct PredictionRecord {
  std::int64_t trip_id;
  std::size_t step;
  LocationId observed_next;
  LocationId predicted_next;
  double prob;
};

/// Scores a predictor on every next-location task in the test set: for each
/// trajectory and each t in [0, len-2], the prefix is the first t+1 locations
/// and the target is location t+1. A prediction within 0.5 (1.0) km of road
/// distance counts toward acc_05 (acc_10); exact hits count toward all
/// three; a predictor that throws scores a miss at every threshold.
inline EvalResult evaluate(const Dataset& test, const ProbedPredictor& predictor,
                           const DistanceFn& distance, const std::string& method,
                           std::vector<PredictionRecord>* records = nullptr) {
  EvalResult result;
  result.method = method;
  std::size_t hits = 0, hits05 = 0, hits10 = 0;
  for (const auto& t : test.trajectories) {
    if (t.size() < 2) continue;
    ++result.n_trajectories;
    Trajectory prefix;
    prefix.trip_id = t.trip_id;
    for (std::size_t i = 0; i + 1 < t.locations.size(); ++i) {
      prefix.locations.assign(t.locations.begin(), t.locations.begin() + i + 1);
      const LocationId target = t.locations[i + 1];
      ++result.n_predictions;
      LocationId predicted = -1;
      double prob = 0.0;
      try {
        std::tie(predicted, prob) = predictor(prefix);
      } catch (const std::exception&) {
        predicted = -1;
        prob = 0.0;
      }
      if (records != nullptr)
        records->push_back({t.trip_id, i + 1, target, predicted, prob});
      if (predicted < 0) continue;
      if (predicted == target) {
        ++hits;
        ++hits05;
        ++hits10;
        continue;
      }
      const double d = distance(predicted, target);
      if (d < 0.5) ++hits05;
      if (d < 1.0) ++hits10;
    }
  }
  if (result.n_predictions > 0) {
    const double n = static_cast<double>(result.n_predictions);
    result.acc = 100.0 * static_cast<double>(hits) / n;
    result.acc_05 = 100.0 * static_cast<double>(hits05) / n;
    result.acc_10 = 100.0 * static_cast<double>(hits10) / n;
  }
  return result;
}

inline EvalResult evaluate(const Dataset& test, const NextLocationPredictor& predictor,
                           const DistanceFn& distance, const std::string& method,
                           std::vector<PredictionRecord>* records = nullptr) {
  return evaluate(
      test,
      ProbedPredictor([&predictor](const Trajectory& prefix) {
        return std::pair<LocationId, double>(predictor(prefix), 0.0);
      }),
      distance, method, records);
}

inline EvalResult evaluate(const Dataset& test, const NextLocationPredictor& predictor,
                           const SensorGraph& graph, const std::string& method,
                           std::vector<PredictionRecord>* records = nullptr) {
  return evaluate(test, predictor, sensor_distance_fn(graph), method, records);
}

inline void write_report_csv(const std::vector<EvalResult>& results, std::uint64_t seed,
                             const std::string& path) {
  csv::Writer w(path, "method,acc,acc_05,acc_10,n_locations,n_trajectories,seed");
  for (const auto& r : results) {
    w.field(r.method)
        .field(r.acc)
        .field(r.acc_05)
        .field(r.acc_10)
        .field(static_cast<std::int64_t>(r.n_predictions))
        .field(static_cast<std::int64_t>(r.n_trajectories))
        .field(static_cast<std::int64_t>(seed));
    w.end_row();
  }
}

inline void write_predictions_csv(const SensorGraph& graph,
                                  const std::vector<PredictionRecord>& records,
                                  const std::string& path) {
  csv::Writer w(path, "trip_id,step,observed_next,predicted_next,prob_of_prediction");
  for (const auto& r : records) {
    w.field(r.trip_id)
        .field(static_cast<std::int64_t>(r.step))
        .field(graph.sensor_id(r.observed_next));
    if (r.predicted_next < 0)
      w.field(std::string("-1"));
    else
      w.field(graph.sensor_id(r.predicted_next));
    w.field(r.prob);
    w.end_row();
  }
}

inline std::string format_report_table(const std::vector<EvalResult>& results) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %8s %8s %8s %12s\n", "method", "acc",
                "acc_0.5", "acc_1.0", "predictions");
  out += line;
  out += std::string(64, '-') + "\n";
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-24s %8.2f %8.2f %8.2f %12zu\n", r.method.c_str(),
                  r.acc, r.acc_05, r.acc_10, r.n_predictions);
    out += line;
  }
  return out;
}

}  // namespace ruirl
