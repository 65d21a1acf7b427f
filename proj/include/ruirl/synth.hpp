// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
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

/// Recipe for a synthetic world: a grid road network with random edge
/// weights, a random subset of nodes carrying sensors, and ground-truth
/// model parameters.
struct SynthSpec {
  int grid_size = 7;
  int n_sensors = 25;
  int k_successors = 4;
  std::vector<double> true_beta = {1.0, 2.0};
  int n_trips = 1000;
  enum class ODMode { kUniform, kHub } od_mode = ODMode::kUniform;
  std::uint64_t seed = 0;
  std::size_t max_len = 0;  // 0: default 4 |S|
  std::size_t min_len = 0;  // 0: keep all

  void validate() const {
    if (grid_size < 2) throw ConfigError("grid_size must be >= 2");
    if (n_sensors < 2 || n_sensors > grid_size * grid_size)
      throw ConfigError("n_sensors must lie in [2, grid_size^2]");
    if (k_successors < 1 || k_successors >= n_sensors)
      throw ConfigError("k_successors must lie in [1, n_sensors)");
    if (n_trips < 0) throw ConfigError("n_trips must be >= 0");
    if (true_beta.size() != static_cast<std::size_t>(kNumFeatures))
      throw ConfigError("true_beta must have " + std::to_string(kNumFeatures) +
                        " entries");
    for (double b : true_beta)
      if (b < 0 || !std::isfinite(b)) throw ConfigError("true_beta must be >= 0");
  }
};

struct SynthWorld {
  RoadNetwork road;
  std::vector<SensorPlacement> sensors;
  SensorGraph graph;
  RewardParams params;
  ODDistribution od;
};

namespace detail {

/// OD weights restricted to pairs where d is reachable from o, uniform over
/// the allowed destination set.
inline ODDistribution reachable_od(const SensorGraph& graph,
                                   const std::vector<LocationId>& destinations) {
  std::map<std::pair<LocationId, LocationId>, double> weights;
  for (LocationId d : destinations) {
    for (LocationId o : reachable_to(graph, d))
      if (o != d) weights[{o, d}] = 1.0;
  }
  return ODDistribution(std::move(weights));
}

}  // namespace detail

/// Builds the synthetic world. The road network is an undirected grid
/// (both arc directions present) with edge lengths U(0.7, 1.3) km shared by
/// the two directions and per-direction travel times length * U(0.8, 1.6)
/// min, so distance and time are correlated but not collinear.
inline SynthWorld make_world(const SynthSpec& spec) {
  spec.validate();
  RandomStream rng = substream(spec.seed, "world");

  RoadNetwork road;
  const int g = spec.grid_size;
  auto node_id = [g](int i, int j) { return static_cast<std::int64_t>(i) * g + j; };
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j)
      road.add_node(node_id(i, j), 45.0 + 0.009 * i, 11.0 + 0.009 * j);

  std::uniform_real_distribution<double> length_dist(0.7, 1.3);
  std::uniform_real_distribution<double> speed_dist(0.8, 1.6);
  auto add_edge = [&](std::int64_t a, std::int64_t b) {
    const double length = length_dist(rng);
    road.add_arc(a, b, length, length * speed_dist(rng));
    road.add_arc(b, a, length, length * speed_dist(rng));
  };
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j) {
      if (j + 1 < g) add_edge(node_id(i, j), node_id(i, j + 1));
      if (i + 1 < g) add_edge(node_id(i, j), node_id(i + 1, j));
    }

  std::vector<std::int64_t> nodes(static_cast<std::size_t>(g) * g);
  for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = static_cast<std::int64_t>(i);
  std::shuffle(nodes.begin(), nodes.end(), rng);
  nodes.resize(spec.n_sensors);
  std::sort(nodes.begin(), nodes.end());

  std::vector<SensorPlacement> sensors;
  for (std::int64_t nid : nodes) {
    const auto c = road.node_coord(road.node_index(nid));
    sensors.push_back({nid, nid, c[0], c[1]});
  }

  SensorGraph graph =
      derive_sensor_graph(road, sensors, SuccessorPolicy::k_nearest(spec.k_successors));

  std::vector<LocationId> destinations;
  if (spec.od_mode == SynthSpec::ODMode::kHub) {
    const std::size_t n_hubs = std::max<std::size_t>(2, graph.size() / 5);
    std::vector<LocationId> all(graph.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<LocationId>(i);
    RandomStream hub_rng = substream(spec.seed, "od_hubs");
    std::shuffle(all.begin(), all.end(), hub_rng);
    all.resize(n_hubs);
    std::sort(all.begin(), all.end());
    destinations = std::move(all);
  } else {
    for (std::size_t i = 0; i < graph.size(); ++i)
      destinations.push_back(static_cast<LocationId>(i));
  }

  RewardParams params;
  params.beta = spec.true_beta;

  ODDistribution od = detail::reachable_od(graph, destinations);
  return SynthWorld{std::move(road), std::move(sensors), std::move(graph),
                    std::move(params), std::move(od)};
}

/// Samples a corpus from the world's ground-truth model. Timestamps follow
/// the edge travel times, with trip i starting at epoch i * 3600 s. Trips
/// shorter than spec.min_len locations are resampled.
inline Dataset make_corpus(const SynthWorld& world, const SynthSpec& spec,
                           RandomStream& rng, const SolverConfig& solver = {}) {
  spec.validate();
  std::map<LocationId, ValueTable> tables;
  Dataset data;
  const std::size_t budget = 100 * static_cast<std::size_t>(spec.n_trips);
  std::size_t draws = 0;
  while (data.trajectories.size() < static_cast<std::size_t>(spec.n_trips)) {
    if (++draws > budget)
      throw RetryCapExceeded("corpus sampling exceeded " + std::to_string(budget) +
                             " draws; min_len filter too strict");
    const auto [o, d] = world.od.sample(rng);
    auto it = tables.find(d);
    if (it == tables.end())
      it = tables.emplace(d, solve_value(world.graph, world.params, d, solver)).first;
    Trajectory t = sample_trajectory(world.graph, world.params, it->second, o, rng,
                                     spec.max_len);
    if (spec.min_len > 0 && t.size() < spec.min_len) continue;
    t.trip_id = static_cast<std::int64_t>(data.trajectories.size());
    t.timestamps.emplace();
    double clock = static_cast<double>(t.trip_id) * 3600.0;
    t.timestamps->push_back(clock);
    for (std::size_t i = 0; i + 1 < t.locations.size(); ++i) {
      clock += world.graph.features(t.locations[i], t.locations[i + 1])[1] * 60.0;
      t.timestamps->push_back(clock);
    }
    data.trajectories.push_back(std::move(t));
  }
  return data;
}

/// Convenience overload seeding the stream from SynthSpec::seed.
inline Dataset make_corpus(const SynthWorld& world, const SynthSpec& spec,
                           const SolverConfig& solver = {}) {
  RandomStream rng = substream(spec.seed, "corpus");
  return make_corpus(world, spec, rng, solver);
}

inline void save_world(const SynthWorld& world, const std::string& dir) {
  {
    csv::Writer w(dir + "/nodes.csv", "node_id,lat,lon");
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(world.road.num_nodes()); ++i) {
      const auto c = world.road.node_coord(i);
      w.field(world.road.node_id(i)).field(c[0]).field(c[1]);
      w.end_row();
    }
  }
  {
    csv::Writer w(dir + "/arcs.csv", "from_node,to_node,length_km,time_min");
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(world.road.num_nodes()); ++i) {
      for (const auto& arc : world.road.arcs_from(i)) {
        w.field(world.road.node_id(i))
            .field(world.road.node_id(arc.to))
            .field(arc.length_km)
            .field(arc.time_min);
        w.end_row();
      }
    }
  }
  {
    csv::Writer w(dir + "/sensors.csv", "sensor_id,node_id,lat,lon");
    for (const auto& s : world.sensors) {
      w.field(s.sensor_id).field(s.node_id).field(s.lat).field(s.lon);
      w.end_row();
    }
  }
  save_sensor_graph(world.graph, dir + "/sensor_graph.csv");
}

}  // namespace ruirl
