// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>

namespace ruirl {

/// Dense index of a sensor location, 0 <= id < |S|. The mapping to external
/// sensor identifiers lives in SensorGraph and is persisted with the graph.
using LocationId = std::int32_t;

/// Number of edge features: 0 = shortest-path road distance [km],
/// 1 = shortest-path travel time [min]. Fixed by the file schemas.
inline constexpr int kNumFeatures = 2;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- file ingestion ---
struct IOError : Error { using Error::Error; };
struct MalformedRecord : Error { using Error::Error; };
struct NegativeWeight : Error { using Error::Error; };
struct DanglingNode : Error { using Error::Error; };
struct AsymmetricFeatureTable : Error { using Error::Error; };
struct MissingTimestamps : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

// --- graph construction and queries ---
struct UnknownNode : Error { using Error::Error; };
struct UnknownSensor : Error { using Error::Error; };
struct UnreachableSensor : Error { using Error::Error; };
struct NotASuccessor : Error { using Error::Error; };
struct NoSuccessor : Error { using Error::Error; };

// --- numerics ---
struct EmptyInput : Error { using Error::Error; };
struct MaxIterationsExceeded : Error { using Error::Error; };
struct Diverged : Error { using Error::Error; };
struct NoFeasibleSuccessor : Error { using Error::Error; };

// --- generative model / likelihood ---
struct RetryCapExceeded : Error { using Error::Error; };
struct InfeasibleStep : Error { using Error::Error; };
struct WrongDestination : Error { using Error::Error; };
struct GammaNotOne : Error { using Error::Error; };

// --- inference / prediction ---
struct NonFiniteInit : Error { using Error::Error; };
struct AllInfeasible : Error { using Error::Error; };
struct AllWeightsZero : Error { using Error::Error; };

}  // namespace ruirl
