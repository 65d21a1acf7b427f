// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ruirl/csv.hpp"
#include "ruirl/network.hpp"
#include "ruirl/types.hpp"

namespace ruirl {

/// One trip: the ordered locations a vehicle was detected at, with optional
/// per-detection epoch timestamps [s]. The final location is the trip's
/// destination.
struct Trajectory {
  std::int64_t trip_id = 0;
  std::vector<LocationId> locations;
  std::optional<std::vector<double>> timestamps;

  std::size_t size() const { return locations.size(); }
  LocationId origin() const { return locations.front(); }
  LocationId destination() const { return locations.back(); }
};

struct Dataset {
  std::vector<Trajectory> trajectories;

  std::size_t size() const { return trajectories.size(); }

  /// Distinct destinations present in the data, ascending.
  std::vector<LocationId> destinations() const {
    std::vector<LocationId> out;
    for (const auto& t : trajectories)
      if (!t.locations.empty()) out.push_back(t.destination());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
};

/// Reads trajectories.csv (trip_id,seq,sensor_id,timestamp). Rows may appear
/// in any order; they are sorted by (trip_id, seq). The timestamp column may
/// be empty, but must be empty or present consistently within a trip.
inline Dataset load_trajectories(const std::string& path, const SensorGraph& graph) {
  csv::Reader reader(path, "trip_id,seq,sensor_id,timestamp");
  struct Row {
    std::int64_t seq;
    LocationId location;
    std::optional<double> timestamp;
  };
  std::map<std::int64_t, std::vector<Row>> trips;
  std::vector<std::string> f;
  while (reader.next(f)) {
    reader.require_fields(f, 4);
    Row row;
    const std::int64_t trip_id = reader.to_int(f[0]);
    row.seq = reader.to_int(f[1]);
    row.location = graph.index_of(reader.to_int(f[2]));
    if (!f[3].empty()) row.timestamp = reader.to_double(f[3]);
    trips[trip_id].push_back(row);
  }

  Dataset data;
  for (auto& [trip_id, rows] : trips) {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.seq < b.seq; });
    Trajectory t;
    t.trip_id = trip_id;
    const bool timed = rows.front().timestamp.has_value();
    if (timed) t.timestamps.emplace();
    for (const auto& row : rows) {
      if (row.timestamp.has_value() != timed)
        throw MalformedRecord("trip " + std::to_string(trip_id) +
                              " mixes timestamped and untimestamped rows");
      t.locations.push_back(row.location);
      if (timed) {
        if (!t.timestamps->empty() && *row.timestamp <= t.timestamps->back())
          throw MalformedRecord("trip " + std::to_string(trip_id) +
                                " timestamps must be strictly increasing");
        t.timestamps->push_back(*row.timestamp);
      }
    }
    data.trajectories.push_back(std::move(t));
  }
  return data;
}

inline void save_trajectories(const Dataset& data, const SensorGraph& graph,
                              const std::string& path) {
  csv::Writer w(path, "trip_id,seq,sensor_id,timestamp");
  for (const auto& t : data.trajectories) {
    for (std::size_t i = 0; i < t.locations.size(); ++i) {
      w.field(t.trip_id).field(static_cast<std::int64_t>(i)).field(
          graph.sensor_id(t.locations[i]));
      if (t.timestamps.has_value())
        w.field((*t.timestamps)[i]);
      else
        w.field(std::string());
      w.end_row();
    }
  }
}

}  // namespace ruirl
