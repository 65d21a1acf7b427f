// Apache License, Version 2.0, refer to LICENSE.txt

#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

#include "oracles.hpp"
#include "ruirl/ruirl.hpp"

using namespace ruirl;
using Catch::Matchers::WithinAbs;

namespace {

Trajectory timed_traj(std::vector<LocationId> locations, std::vector<double> ts,
                      std::int64_t id = 0) {
  Trajectory t;
  t.trip_id = id;
  t.locations = std::move(locations);
  t.timestamps = std::move(ts);
  return t;
}

Trajectory make_traj(std::vector<LocationId> locations, std::int64_t id = 0) {
  Trajectory t;
  t.trip_id = id;
  t.locations = std::move(locations);
  return t;
}

bool same_trips(const Dataset& a, const Dataset& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.trajectories[i].trip_id != b.trajectories[i].trip_id) return false;
    if (a.trajectories[i].locations != b.trajectories[i].locations) return false;
    if (a.trajectories[i].timestamps != b.trajectories[i].timestamps) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("split_trips") {
  SECTION("stream with no long gaps passes through") {
    std::vector<LocationId> locs{0, 1, 2, 3, 4, 5, 6, 7};
    std::vector<double> ts;
    for (int i = 0; i < 8; ++i) ts.push_back(1000.0 + 600.0 * i);  // 10-min steps
    Dataset raw;
    raw.trajectories = {timed_traj(locs, ts, 42)};
    Dataset out = split_trips(raw);
    REQUIRE(out.size() == 1);
    CHECK(out.trajectories[0].locations == locs);
    CHECK(*out.trajectories[0].timestamps == ts);
  }
  SECTION("a 31-minute gap splits 12 points into two trips of 6") {
    std::vector<LocationId> locs;
    std::vector<double> ts;
    for (int i = 0; i < 12; ++i) {
      locs.push_back(i);
      ts.push_back(60.0 * i + (i >= 6 ? 31.0 * 60.0 : 0.0));
    }
    Dataset raw;
    raw.trajectories = {timed_traj(locs, ts)};
    Dataset out = split_trips(raw);
    REQUIRE(out.size() == 2);
    CHECK(out.trajectories[0].locations == std::vector<LocationId>{0, 1, 2, 3, 4, 5});
    CHECK(out.trajectories[1].locations == std::vector<LocationId>{6, 7, 8, 9, 10, 11});
    CHECK(out.trajectories[0].trip_id == 0);
    CHECK(out.trajectories[1].trip_id == 1);
  }
  SECTION("a gap of exactly the cutoff does not split") {
    std::vector<LocationId> locs;
    std::vector<double> ts;
    for (int i = 0; i < 12; ++i) {
      locs.push_back(i);
      ts.push_back(60.0 * i + (i >= 6 ? 30.0 * 60.0 - 60.0 : 0.0));
    }
    Dataset raw;
    raw.trajectories = {timed_traj(locs, ts)};
    CHECK(split_trips(raw).size() == 1);
  }
  SECTION("fragments shorter than min_len are discarded") {
    std::vector<LocationId> locs;
    std::vector<double> ts;
    for (int i = 0; i < 11; ++i) {
      locs.push_back(i);
      ts.push_back(60.0 * i + (i >= 6 ? 45.0 * 60.0 : 0.0));
    }
    Dataset raw;
    raw.trajectories = {timed_traj(locs, ts)};
    Dataset out = split_trips(raw);
    REQUIRE(out.size() == 1);  // 6-point head kept, 5-point tail dropped
    CHECK(out.trajectories[0].locations.size() == 6);

    Dataset none;
    none.trajectories = {timed_traj({0, 1, 2}, {0.0, 10.0, 20.0})};
    CHECK(split_trips(none).size() == 0);
    CHECK(split_trips(none, 30.0, 3).size() == 1);
  }
  SECTION("missing timestamps") {
    Dataset raw;
    raw.trajectories = {make_traj({0, 1, 2, 3, 4, 5})};
    CHECK_THROWS_AS(split_trips(raw), MissingTimestamps);
  }
  SECTION("idempotent on its own output") {
    RandomStream rng = substream(191, "split_idem");
    Dataset raw;
    for (int k = 0; k < 5; ++k) {
      std::vector<LocationId> locs;
      std::vector<double> ts;
      double t = 0.0;
      for (int i = 0; i < 40; ++i) {
        locs.push_back(i % 9);
        t += 60.0 + 3000.0 * (uniform01(rng) < 0.1 ? 1.0 : 0.01);
        ts.push_back(t);
      }
      raw.trajectories.push_back(timed_traj(locs, ts, k));
    }
    Dataset once = split_trips(raw);
    Dataset twice = split_trips(once);
    CHECK(same_trips(once, twice));
  }
}

TEST_CASE("train_test_split") {
  Dataset ten;
  for (int i = 0; i < 10; ++i) ten.trajectories.push_back(make_traj({0, 1}, i));

  SECTION("10 trips at 0.8 give 8/2") {
    auto [train, test] = train_test_split(ten, 0.8, 7);
    CHECK(train.size() == 8);
    CHECK(test.size() == 2);
  }
  SECTION("holdout size matches at corpus scale") {
    Dataset big;
    big.trajectories.resize(48920);
    for (std::size_t i = 0; i < big.size(); ++i) big.trajectories[i].trip_id = i;
    auto [train, test] = train_test_split(big, 0.8, 1);
    CHECK(train.size() == 39136);
    CHECK(test.size() == 9784);
  }
  SECTION("same seed reproduces the partition") {
    auto [a_train, a_test] = train_test_split(ten, 0.7, 33);
    auto [b_train, b_test] = train_test_split(ten, 0.7, 33);
    CHECK(same_trips(a_train, b_train));
    CHECK(same_trips(a_test, b_test));
    auto [c_train, c_test] = train_test_split(ten, 0.7, 34);
    bool same = same_trips(a_train, c_train);
    CHECK_FALSE(same);
  }
  SECTION("partition is exact: union is the input, intersection empty") {
    auto [train, test] = train_test_split(ten, 0.55, 5);
    std::set<std::int64_t> seen;
    for (const auto& t : train.trajectories) seen.insert(t.trip_id);
    for (const auto& t : test.trajectories) seen.insert(t.trip_id);
    CHECK(train.size() + test.size() == 10);
    CHECK(seen.size() == 10);
  }
  SECTION("ratio must lie strictly inside (0, 1)") {
    CHECK_THROWS_AS(train_test_split(ten, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(train_test_split(ten, 1.0, 1), ConfigError);
    CHECK_THROWS_AS(train_test_split(ten, -0.2, 1), ConfigError);
    CHECK_THROWS_AS(train_test_split(ten, 1.7, 1), ConfigError);
  }
}

TEST_CASE("evaluate scores prediction tasks") {
  Dataset test;
  test.trajectories = {make_traj({0, 1, 2, 0, 1}, 1), make_traj({2, 1}, 2),
                       make_traj({0}, 3)};
  std::map<std::int64_t, std::vector<LocationId>> truth;
  for (const auto& t : test.trajectories) truth[t.trip_id] = t.locations;

  const DistanceFn zero = [](LocationId, LocationId) { return 0.0; };

  SECTION("the oracle predictor scores 100 everywhere") {
    NextLocationPredictor oracle_pred = [&truth](const Trajectory& prefix) {
      return truth.at(prefix.trip_id).at(prefix.locations.size());
    };
    EvalResult r = evaluate(test, oracle_pred, zero, "oracle");
    CHECK(r.acc == 100.0);
    CHECK(r.acc_05 == 100.0);
    CHECK(r.acc_10 == 100.0);
    CHECK(r.n_predictions == 5);   // 4 tasks + 1 task; length-1 trip contributes none
    CHECK(r.n_trajectories == 2);
    CHECK(r.method == "oracle");
  }
  SECTION("near-miss thresholds are strict") {
    NextLocationPredictor wrong = [&truth](const Trajectory& prefix) {
      const LocationId target = truth.at(prefix.trip_id).at(prefix.locations.size());
      return static_cast<LocationId>(target + 100);  // never exact
    };
    EvalResult at04 = evaluate(test, wrong, [](LocationId, LocationId) { return 0.4; }, "m");
    CHECK(at04.acc == 0.0);
    CHECK(at04.acc_05 == 100.0);
    CHECK(at04.acc_10 == 100.0);
    EvalResult at07 = evaluate(test, wrong, [](LocationId, LocationId) { return 0.7; }, "m");
    CHECK(at07.acc_05 == 0.0);
    CHECK(at07.acc_10 == 100.0);
    EvalResult at10 = evaluate(test, wrong, [](LocationId, LocationId) { return 1.0; }, "m");
    CHECK(at10.acc_05 == 0.0);
    CHECK(at10.acc_10 == 0.0);
  }
  SECTION("a throwing predictor is a miss, not a crash") {
    NextLocationPredictor boom = [](const Trajectory&) -> LocationId {
      throw NoFeasibleSuccessor("nope");
    };
    std::vector<PredictionRecord> records;
    EvalResult r = evaluate(test, boom, zero, "boom", &records);
    CHECK(r.acc == 0.0);
    CHECK(r.acc_10 == 0.0);
    CHECK(r.n_predictions == 5);
    REQUIRE(records.size() == 5);
    for (const auto& rec : records) {
      CHECK(rec.predicted_next == -1);
      CHECK(rec.prob == 0.0);
    }
  }
  SECTION("prefixes grow from the first observation") {
    std::vector<std::vector<LocationId>> seen;
    NextLocationPredictor spy = [&seen](const Trajectory& prefix) {
      seen.push_back(prefix.locations);
      return prefix.locations.back();
    };
    Dataset one;
    one.trajectories = {make_traj({4, 7, 2, 9}, 5)};
    evaluate(one, spy, zero, "spy");
    const std::vector<std::vector<LocationId>> expect{{4}, {4, 7}, {4, 7, 2}};
    CHECK(seen == expect);
  }
}

TEST_CASE("sensor_distance_fn matches a Floyd-Warshall oracle") {
  RandomStream rng = substream(193, "eval_dist");
  SensorGraph g = oracle::random_graph(12, 3, rng);
  REQUIRE_FALSE(g.has_pairwise_distances());
  DistanceFn dist = sensor_distance_fn(g);

  std::vector<std::tuple<std::size_t, std::size_t, double>> edges;
  for (LocationId s = 0; s < 12; ++s) {
    const auto& succ = g.successors(s);
    for (std::size_t i = 0; i < succ.size(); ++i)
      edges.emplace_back(s, succ[i], g.feature_row(s)[i][0]);
  }
  const auto fw = oracle::floyd_warshall(12, edges);
  for (LocationId a = 0; a < 12; ++a)
    for (LocationId b = 0; b < 12; ++b)
      CHECK_THAT(dist(a, b), WithinAbs(fw[a][b], 1e-9));
}

TEST_CASE("accuracy ordering invariant holds for real predictors") {
  SynthSpec spec;
  spec.grid_size = 5;
  spec.n_sensors = 12;
  spec.k_successors = 3;
  spec.true_beta = {1.5, 1.0};
  spec.n_trips = 120;
  spec.seed = 11;
  SynthWorld world = make_world(spec);
  Dataset corpus = make_corpus(world, spec);
  auto [train, test] = train_test_split(corpus, 0.8, 3);

  MarkovModel markov = markov_fit(train);
  const DistanceFn dist = sensor_distance_fn(world.graph);
  const SensorGraph& g = world.graph;
  RandomStream pick = substream(197, "eval_rand_pred");

  const std::vector<std::pair<std::string, NextLocationPredictor>> predictors{
      {"nn_distance",
       [&g](const Trajectory& p) { return nn_predict(g, p.locations.back(), Metric::kDistance); }},
      {"markov",
       [&](const Trajectory& p) { return markov_predict(markov, g, p.locations.back()); }},
      {"random",
       [&](const Trajectory& p) { return random_predict(g, p.locations.back(), pick); }}};
  for (const auto& [name, pred] : predictors) {
    EvalResult r = evaluate(test, pred, dist, name);
    INFO(name);
    CHECK(r.acc >= 0.0);
    CHECK(r.acc <= r.acc_05);
    CHECK(r.acc_05 <= r.acc_10);
    CHECK(r.acc_10 <= 100.0);
    CHECK(r.n_predictions > 0);
  }
}

TEST_CASE("report and prediction csv outputs") {
  oracle::TempDir dir("eval_csv");
  std::vector<EvalResult> results(2);
  results[0] = {"ruirl", 69.5, 80.0, 90.25, 1234, 99};
  results[1] = {"random", 8.25, 20.5, 30.0, 1234, 99};
  write_report_csv(results, 17, dir.path("report.csv"));
  const std::string report = oracle::read_file(dir.path("report.csv"));
  CHECK(report.rfind("method,acc,acc_05,acc_10,n_locations,n_trajectories,seed\n", 0) == 0);
  CHECK(report.find("ruirl,69.5,80,90.25") != std::string::npos);
  CHECK(report.find(",1234,99,17") != std::string::npos);

  std::map<LocationId, std::map<LocationId, std::array<double, 2>>> e{
      {0, {{1, {1, 1}}}}, {1, {{0, {1, 1}}}}};
  SensorGraph g = oracle::graph_from_edges(2, e);
  std::vector<PredictionRecord> records{{7, 1, 1, 1, 0.75}, {7, 2, 0, -1, 0.0}};
  write_predictions_csv(g, records, dir.path("predictions.csv"));
  const std::string preds = oracle::read_file(dir.path("predictions.csv"));
  CHECK(preds.rfind("trip_id,step,observed_next,predicted_next,prob_of_prediction\n", 0) == 0);
  CHECK(preds.find("7,1,1,1,0.75") != std::string::npos);
  CHECK(preds.find("7,2,0,-1,0") != std::string::npos);

  const std::string table = format_report_table(results);
  CHECK(table.find("ruirl") != std::string::npos);
  CHECK(table.find("69.50") != std::string::npos);
  CHECK(table.find("acc") != std::string::npos);
}
