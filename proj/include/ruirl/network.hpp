// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <queue>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ruirl/csv.hpp"
#include "ruirl/types.hpp"

namespace ruirl {

// ---------------------------------------------------------------------------
// Road network
// ---------------------------------------------------------------------------

/// Directed road graph over intersection nodes. Substrate for the sensor
/// graph's edge features (shortest-path distance and travel time); never used
/// directly by the decision model.
class RoadNetwork {
 public:
  struct Arc {
    std::int32_t to;
    double length_km;
    double time_min;
  };

  void add_node(std::int64_t id, double lat, double lon) {
    if (index_.count(id))
      throw MalformedRecord("duplicate node id " + std::to_string(id));
    index_.emplace(id, static_cast<std::int32_t>(node_ids_.size()));
    node_ids_.push_back(id);
    coords_.push_back({lat, lon});
    adjacency_.emplace_back();
  }

  void add_arc(std::int64_t from, std::int64_t to, double length_km, double time_min) {
    auto fi = index_.find(from);
    auto ti = index_.find(to);
    if (fi == index_.end() || ti == index_.end())
      throw DanglingNode("arc " + std::to_string(from) + "->" + std::to_string(to) +
                         " references a missing node");
    if (length_km < 0 || time_min < 0 || !std::isfinite(length_km) || !std::isfinite(time_min))
      throw NegativeWeight("arc " + std::to_string(from) + "->" + std::to_string(to) +
                           " has a negative or non-finite weight");
    const std::uint64_t key =
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(fi->second)) << 32) |
        static_cast<std::uint32_t>(ti->second);
    if (!arc_keys_.insert(key).second)
      throw MalformedRecord("duplicate arc " + std::to_string(from) + "->" + std::to_string(to));
    adjacency_[fi->second].push_back({ti->second, length_km, time_min});
    ++num_arcs_;
  }

  std::size_t num_nodes() const { return node_ids_.size(); }
  std::size_t num_arcs() const { return num_arcs_; }

  bool has_node(std::int64_t id) const { return index_.count(id) != 0; }

  std::int32_t node_index(std::int64_t id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw UnknownNode("unknown node id " + std::to_string(id));
    return it->second;
  }

  std::int64_t node_id(std::int32_t index) const { return node_ids_.at(index); }
  std::array<double, 2> node_coord(std::int32_t index) const { return coords_.at(index); }
  const std::vector<Arc>& arcs_from(std::int32_t index) const { return adjacency_.at(index); }

  enum class ArcWeight { kLength, kTime };

  /// Single-source shortest paths (Dijkstra) under the chosen weight.
  /// Unreachable nodes get +infinity.
  std::vector<double> shortest_paths(std::int64_t source_id, ArcWeight weight) const {
    const std::int32_t src = node_index(source_id);
    std::vector<double> dist(num_nodes(), kInfinity);
    using Item = std::pair<double, std::int32_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[src] = 0.0;
    heap.emplace(0.0, src);
    while (!heap.empty()) {
      auto [d, u] = heap.top();
      heap.pop();
      if (d > dist[u]) continue;
      for (const Arc& arc : adjacency_[u]) {
        const double w = weight == ArcWeight::kLength ? arc.length_km : arc.time_min;
        const double nd = d + w;
        if (nd < dist[arc.to]) {
          dist[arc.to] = nd;
          heap.emplace(nd, arc.to);
        }
      }
    }
    return dist;
  }

 private:
  std::vector<std::int64_t> node_ids_;
  std::vector<std::array<double, 2>> coords_;  // lat, lon [deg]
  std::unordered_map<std::int64_t, std::int32_t> index_;
  std::vector<std::vector<Arc>> adjacency_;
  std::unordered_set<std::uint64_t> arc_keys_;
  std::size_t num_arcs_ = 0;
};

/// Loads a road network from `arcs.csv` (from_node,to_node,length_km,time_min)
/// and `nodes.csv` (node_id,lat,lon).
inline RoadNetwork load_road_network(const std::string& arcs_file,
                                     const std::string& nodes_file) {
  RoadNetwork road;
  {
    csv::Reader reader(nodes_file, "node_id,lat,lon");
    std::vector<std::string> f;
    while (reader.next(f)) {
      reader.require_fields(f, 3);
      road.add_node(reader.to_int(f[0]), reader.to_double(f[1]), reader.to_double(f[2]));
    }
  }
  {
    csv::Reader reader(arcs_file, "from_node,to_node,length_km,time_min");
    std::vector<std::string> f;
    while (reader.next(f)) {
      reader.require_fields(f, 4);
      road.add_arc(reader.to_int(f[0]), reader.to_int(f[1]), reader.to_double(f[2]),
                   reader.to_double(f[3]));
    }
  }
  return road;
}

// ---------------------------------------------------------------------------
// Sensor graph
// ---------------------------------------------------------------------------

/// How the reachable set A_s of a sensor is constructed from road distances.
struct SuccessorPolicy {
  enum class Kind { kNearest, kRadius } kind = Kind::kNearest;
  int k = 10;
  double radius_km = 0.0;

  static SuccessorPolicy k_nearest(int k) {
    if (k < 1) throw ConfigError("k-nearest policy requires k >= 1");
    return {Kind::kNearest, k, 0.0};
  }
  static SuccessorPolicy radius(double r_km) {
    if (!(r_km > 0)) throw ConfigError("radius policy requires r > 0");
    return {Kind::kRadius, 0, r_km};
  }
};

struct SensorPlacement {
  std::int64_t sensor_id;
  std::int64_t node_id;
  double lat;
  double lon;
};

/// Immutable location graph for the decision model: locations S, ordered
/// successor sets A_s, and the per-edge feature vector
/// (shortest-path distance [km], shortest-path travel time [min]).
///
/// Internal LocationIds are assigned by ascending external sensor id, and
/// successor sets are kept sorted by id, so every iteration over the graph is
/// reproducible. Safe to share across threads once built.
class SensorGraph {
 public:
  SensorGraph() = default;

  SensorGraph(std::vector<std::int64_t> sensor_ids,
              std::vector<std::array<double, 2>> coords,
              std::vector<std::vector<LocationId>> successors,
              std::vector<std::vector<std::array<double, kNumFeatures>>> features)
      : sensor_ids_(std::move(sensor_ids)),
        coords_(std::move(coords)),
        successors_(std::move(successors)),
        features_(std::move(features)) {
    const auto n = sensor_ids_.size();
    if (coords_.size() != n || successors_.size() != n || features_.size() != n)
      throw ConfigError("sensor graph: inconsistent container sizes");
    if (!std::is_sorted(sensor_ids_.begin(), sensor_ids_.end()) ||
        std::adjacent_find(sensor_ids_.begin(), sensor_ids_.end()) != sensor_ids_.end())
      throw ConfigError("sensor graph: external ids must be strictly ascending");
    for (std::size_t s = 0; s < n; ++s) {
      auto& succ = successors_[s];
      if (features_[s].size() != succ.size())
        throw ConfigError("sensor graph: feature rows must align with successors");
      if (!std::is_sorted(succ.begin(), succ.end()) ||
          std::adjacent_find(succ.begin(), succ.end()) != succ.end())
        throw ConfigError("sensor graph: successor sets must be strictly ascending");
      for (std::size_t i = 0; i < succ.size(); ++i) {
        if (succ[i] < 0 || static_cast<std::size_t>(succ[i]) >= n)
          throw ConfigError("sensor graph: successor id out of range");
        if (succ[i] == static_cast<LocationId>(s))
          throw ConfigError("sensor graph: self-loops are excluded from A_s");
        for (double v : features_[s][i])
          if (!std::isfinite(v) || v < 0)
            throw ConfigError("sensor graph: features must be finite and >= 0");
      }
    }
    for (std::size_t s = 0; s < n; ++s)
      index_.emplace(sensor_ids_[s], static_cast<LocationId>(s));
  }

  std::size_t size() const { return sensor_ids_.size(); }

  std::int64_t sensor_id(LocationId s) const { return sensor_ids_.at(s); }

  LocationId index_of(std::int64_t sensor_id) const {
    auto it = index_.find(sensor_id);
    if (it == index_.end())
      throw UnknownSensor("unknown sensor id " + std::to_string(sensor_id));
    return it->second;
  }

  bool has_sensor(std::int64_t sensor_id) const { return index_.count(sensor_id) != 0; }

  std::array<double, 2> coord(LocationId s) const { return coords_.at(s); }

  const std::vector<LocationId>& successors(LocationId s) const {
    return successors_.at(s);
  }

  /// Position of s2 within A_s, or -1 when s2 is not a successor of s.
  int successor_index(LocationId s, LocationId s2) const {
    const auto& succ = successors_.at(s);
    auto it = std::lower_bound(succ.begin(), succ.end(), s2);
    if (it == succ.end() || *it != s2) return -1;
    return static_cast<int>(it - succ.begin());
  }

  const std::array<double, kNumFeatures>& features(LocationId s, LocationId s2) const {
    const int i = successor_index(s, s2);
    if (i < 0)
      throw NotASuccessor(std::to_string(sensor_id(s2)) + " is not a successor of " +
                          std::to_string(sensor_id(s)));
    return features_[s][i];
  }

  const std::vector<std::array<double, kNumFeatures>>& feature_row(LocationId s) const {
    return features_.at(s);
  }

  // Full sensor-to-sensor road distance matrix [km], filled by
  // derive_sensor_graph. Empty when the graph was loaded from CSV alone; the
  // near-miss metrics then fall back to shortest paths over the graph edges.
  bool has_pairwise_distances() const { return !pairwise_km_.empty(); }

  double pairwise_km(LocationId a, LocationId b) const {
    return pairwise_km_.at(static_cast<std::size_t>(a) * size() + b);
  }

  void set_pairwise_distances(std::vector<double> matrix) {
    if (matrix.size() != size() * size())
      throw ConfigError("pairwise distance matrix has wrong size");
    pairwise_km_ = std::move(matrix);
  }

 private:
  std::vector<std::int64_t> sensor_ids_;             // ascending external ids
  std::vector<std::array<double, 2>> coords_;        // lat, lon [deg]
  std::vector<std::vector<LocationId>> successors_;  // A_s, ascending
  std::vector<std::vector<std::array<double, kNumFeatures>>> features_;
  std::unordered_map<std::int64_t, LocationId> index_;
  std::vector<double> pairwise_km_;
};

inline std::vector<SensorPlacement> load_sensors(const std::string& sensors_file) {
  csv::Reader reader(sensors_file, "sensor_id,node_id,lat,lon");
  std::vector<SensorPlacement> out;
  std::unordered_set<std::int64_t> seen;
  std::vector<std::string> f;
  while (reader.next(f)) {
    reader.require_fields(f, 4);
    SensorPlacement p{reader.to_int(f[0]), reader.to_int(f[1]), reader.to_double(f[2]),
                      reader.to_double(f[3])};
    if (!seen.insert(p.sensor_id).second)
      reader.fail("duplicate sensor id " + std::to_string(p.sensor_id));
    out.push_back(p);
  }
  return out;
}

/// Builds the sensor graph from a road network: A_s is the k nearest other
/// sensors by road distance (or all within a radius), and features are the
/// independent shortest-path distance and travel time between the sensors'
/// road nodes. Ties in the k-nearest cut are broken by ascending sensor id.
inline SensorGraph derive_sensor_graph(const RoadNetwork& road,
                                       const std::vector<SensorPlacement>& sensors,
                                       const SuccessorPolicy& policy) {
  if (sensors.empty()) throw ConfigError("derive_sensor_graph: no sensors given");

  std::vector<SensorPlacement> ordered = sensors;
  std::sort(ordered.begin(), ordered.end(),
            [](const SensorPlacement& a, const SensorPlacement& b) {
              return a.sensor_id < b.sensor_id;
            });
  for (std::size_t i = 1; i < ordered.size(); ++i)
    if (ordered[i].sensor_id == ordered[i - 1].sensor_id)
      throw ConfigError("duplicate sensor id " + std::to_string(ordered[i].sensor_id));

  const std::size_t n = ordered.size();
  std::vector<std::int64_t> ids(n);
  std::vector<std::array<double, 2>> coords(n);
  std::vector<std::int32_t> node_of(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = ordered[i].sensor_id;
    coords[i] = {ordered[i].lat, ordered[i].lon};
    node_of[i] = road.node_index(ordered[i].node_id);  // throws UnknownNode
  }

  // Per-sensor shortest paths over the road network, one Dijkstra per weight.
  std::vector<std::vector<LocationId>> succ(n);
  std::vector<std::vector<std::array<double, kNumFeatures>>> feat(n);
  std::vector<double> pairwise(n * n, kInfinity);
  for (std::size_t s = 0; s < n; ++s) {
    const auto dist = road.shortest_paths(ordered[s].node_id, RoadNetwork::ArcWeight::kLength);
    const auto time = road.shortest_paths(ordered[s].node_id, RoadNetwork::ArcWeight::kTime);
    std::vector<std::pair<double, LocationId>> candidates;  // (road km, id)
    for (std::size_t t = 0; t < n; ++t) {
      pairwise[s * n + t] = dist[node_of[t]];
      if (t == s) continue;
      if (std::isfinite(dist[node_of[t]]))
        candidates.emplace_back(dist[node_of[t]], static_cast<LocationId>(t));
    }
    if (candidates.empty())
      throw UnreachableSensor("sensor " + std::to_string(ids[s]) +
                              " reaches no other sensor over the road network");
    std::sort(candidates.begin(), candidates.end());
    std::size_t keep;
    if (policy.kind == SuccessorPolicy::Kind::kNearest) {
      keep = std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(policy.k));
    } else {
      keep = 0;
      while (keep < candidates.size() && candidates[keep].first <= policy.radius_km) ++keep;
      if (keep == 0)
        throw UnreachableSensor("sensor " + std::to_string(ids[s]) +
                                " has no neighbor within " +
                                std::to_string(policy.radius_km) + " km");
    }
    candidates.resize(keep);
    std::sort(candidates.begin(), candidates.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    for (const auto& [d, t] : candidates) {
      succ[s].push_back(t);
      feat[s].push_back({d, time[node_of[t]]});
    }
  }

  SensorGraph graph(std::move(ids), std::move(coords), std::move(succ), std::move(feat));
  graph.set_pairwise_distances(std::move(pairwise));
  return graph;
}

/// Map-based overload; coordinates are taken from the road nodes.
inline SensorGraph derive_sensor_graph(const RoadNetwork& road,
                                       const std::map<std::int64_t, std::int64_t>& sensors,
                                       const SuccessorPolicy& policy) {
  std::vector<SensorPlacement> placements;
  placements.reserve(sensors.size());
  for (const auto& [sid, nid] : sensors) {
    const auto c = road.node_coord(road.node_index(nid));
    placements.push_back({sid, nid, c[0], c[1]});
  }
  return derive_sensor_graph(road, placements, policy);
}

inline void save_sensor_graph(const SensorGraph& graph, const std::string& path) {
  csv::Writer w(path, "from_sensor,to_sensor,dist_km,time_min");
  for (LocationId s = 0; s < static_cast<LocationId>(graph.size()); ++s) {
    const auto& succ = graph.successors(s);
    const auto& feat = graph.feature_row(s);
    for (std::size_t i = 0; i < succ.size(); ++i) {
      w.field(graph.sensor_id(s))
          .field(graph.sensor_id(succ[i]))
          .field(feat[i][0])
          .field(feat[i][1]);
      w.end_row();
    }
  }
}

namespace detail {

struct GraphRow {
  std::int64_t from, to;
  double dist_km, time_min;
};

inline SensorGraph build_from_rows(const std::vector<GraphRow>& rows,
                                   std::vector<std::int64_t> ids,
                                   std::vector<std::array<double, 2>> coords) {
  std::unordered_map<std::int64_t, LocationId> index;
  for (std::size_t i = 0; i < ids.size(); ++i)
    index.emplace(ids[i], static_cast<LocationId>(i));

  const std::size_t n = ids.size();
  std::vector<std::map<LocationId, std::array<double, kNumFeatures>>> edges(n);
  for (const auto& row : rows) {
    const LocationId s = index.at(row.from);
    const LocationId t = index.at(row.to);
    if (!edges[s].emplace(t, std::array<double, kNumFeatures>{row.dist_km, row.time_min}).second)
      throw AsymmetricFeatureTable("duplicate feature row for edge " +
                                   std::to_string(row.from) + "->" + std::to_string(row.to));
  }
  std::vector<std::vector<LocationId>> succ(n);
  std::vector<std::vector<std::array<double, kNumFeatures>>> feat(n);
  for (std::size_t s = 0; s < n; ++s) {
    for (const auto& [t, f] : edges[s]) {
      succ[s].push_back(t);
      feat[s].push_back(f);
    }
  }
  return SensorGraph(std::move(ids), std::move(coords), std::move(succ), std::move(feat));
}

}  // namespace detail

/// Loads a precomputed sensor graph. The sensor set is the union of ids seen
/// in the file; coordinates are unknown (0,0) in this form.
inline SensorGraph load_sensor_graph(const std::string& graph_file) {
  csv::Reader reader(graph_file, "from_sensor,to_sensor,dist_km,time_min");
  std::vector<detail::GraphRow> rows;
  std::vector<std::int64_t> ids;
  std::vector<std::string> f;
  while (reader.next(f)) {
    reader.require_fields(f, 4);
    detail::GraphRow row{reader.to_int(f[0]), reader.to_int(f[1]), reader.to_double(f[2]),
                         reader.to_double(f[3])};
    if (row.dist_km < 0 || row.time_min < 0) reader.fail("negative feature value");
    rows.push_back(row);
    ids.push_back(row.from);
    ids.push_back(row.to);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<std::array<double, 2>> coords(ids.size(), {0.0, 0.0});
  return detail::build_from_rows(rows, std::move(ids), std::move(coords));
}

/// Overload with an explicit sensor table: ids and coordinates come from
/// sensors.csv and a graph row referencing an unlisted sensor is malformed.
inline SensorGraph load_sensor_graph(const std::string& graph_file,
                                     const std::string& sensors_file) {
  const auto placements = load_sensors(sensors_file);
  std::vector<std::int64_t> ids;
  for (const auto& p : placements) ids.push_back(p.sensor_id);
  std::sort(ids.begin(), ids.end());
  std::unordered_set<std::int64_t> known(ids.begin(), ids.end());
  std::vector<std::array<double, 2>> coords(ids.size());
  for (const auto& p : placements) {
    const auto pos = std::lower_bound(ids.begin(), ids.end(), p.sensor_id) - ids.begin();
    coords[pos] = {p.lat, p.lon};
  }

  csv::Reader reader(graph_file, "from_sensor,to_sensor,dist_km,time_min");
  std::vector<detail::GraphRow> rows;
  std::vector<std::string> f;
  while (reader.next(f)) {
    reader.require_fields(f, 4);
    detail::GraphRow row{reader.to_int(f[0]), reader.to_int(f[1]), reader.to_double(f[2]),
                         reader.to_double(f[3])};
    if (!known.count(row.from)) reader.fail("unknown sensor id " + std::to_string(row.from));
    if (!known.count(row.to)) reader.fail("unknown sensor id " + std::to_string(row.to));
    if (row.dist_km < 0 || row.time_min < 0) reader.fail("negative feature value");
    rows.push_back(row);
  }
  return detail::build_from_rows(rows, std::move(ids), std::move(coords));
}

namespace detail {

/// Mask of states from which `d` is reachable via successor sets (backward
/// closure; always includes d).
inline std::vector<char> reachable_mask(const SensorGraph& graph, LocationId d) {
  const std::size_t n = graph.size();
  if (d < 0 || static_cast<std::size_t>(d) >= n)
    throw UnknownSensor("destination id out of range");
  std::vector<std::vector<LocationId>> reverse(n);
  for (LocationId s = 0; s < static_cast<LocationId>(n); ++s)
    for (LocationId t : graph.successors(s)) reverse[t].push_back(s);
  std::vector<char> mask(n, 0);
  std::vector<LocationId> stack{d};
  mask[d] = 1;
  while (!stack.empty()) {
    const LocationId u = stack.back();
    stack.pop_back();
    for (LocationId p : reverse[u])
      if (!mask[p]) {
        mask[p] = 1;
        stack.push_back(p);
      }
  }
  return mask;
}

}  // namespace detail

/// States from which the destination is reachable, ascending. Contains d.
inline std::vector<LocationId> reachable_to(const SensorGraph& graph, LocationId d) {
  const auto mask = detail::reachable_mask(graph, d);
  std::vector<LocationId> out;
  for (LocationId s = 0; s < static_cast<LocationId>(graph.size()); ++s)
    if (mask[s]) out.push_back(s);
  return out;
}

}  // namespace ruirl
