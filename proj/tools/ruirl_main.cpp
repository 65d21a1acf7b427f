// Apache License, Version 2.0, refer to LICENSE.txt

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ruirl/ruirl.hpp"

namespace {

using namespace ruirl;

struct GlobalOpts {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_dir = ".";
};

std::string out_path(const GlobalOpts& g, const std::string& name) {
  std::filesystem::create_directories(g.out_dir);
  return (std::filesystem::path(g.out_dir) / name).string();
}

/// RUIRL_OUT_DIR, when set, overrides --out-dir.
void apply_env_overrides(GlobalOpts& g) {
  if (const char* env = std::getenv("RUIRL_OUT_DIR"); env != nullptr && *env != '\0')
    g.out_dir = env;
}

SensorGraph load_graph(const std::string& graph_file, const std::string& sensors_file) {
  if (sensors_file.empty()) return load_sensor_graph(graph_file);
  return load_sensor_graph(graph_file, sensors_file);
}

/// Drops trajectories the model structurally cannot produce (a step outside
/// A_s, an interior visit to the own destination, or an origin that cannot
/// reach the destination). Returns the number dropped.
std::size_t drop_infeasible(const SensorGraph& graph, Dataset& data) {
  std::map<LocationId, std::vector<char>> masks;
  Dataset kept;
  std::size_t dropped = 0;
  for (auto& t : data.trajectories) {
    bool ok = !t.locations.empty();
    if (ok) {
      const LocationId d = t.destination();
      try {
        ok = detail::check_trajectory(graph, t, d);
      } catch (const Error&) {
        ok = false;
      }
      if (ok) {
        auto it = masks.find(d);
        if (it == masks.end()) it = masks.emplace(d, detail::reachable_mask(graph, d)).first;
        ok = it->second[t.origin()] != 0;
      }
    }
    if (ok)
      kept.trajectories.push_back(std::move(t));
    else
      ++dropped;
  }
  data = std::move(kept);
  return dropped;
}

std::vector<Beta> default_init_grid() {
  const std::vector<double> axis = {0.0, 0.5, 1.0, 2.0, 4.0};
  std::vector<Beta> grid;
  for (double b1 : axis)
    for (double b2 : axis) grid.push_back({b1, b2});
  return grid;
}

struct FitOpts {
  std::string graph_file, sensors_file, traj_file;
  MHConfig mh;
  std::vector<double> init;
};

PosteriorChain fit_corpus(const SensorGraph& graph, Dataset& data, const FitOpts& opt,
                          std::uint64_t seed) {
  const std::size_t dropped = drop_infeasible(graph, data);
  if (dropped > 0)
    std::cerr << "warning: dropped " << dropped
              << " trajectories the sensor graph cannot produce\n";
  if (data.trajectories.empty()) throw EmptyInput("no feasible trajectories to fit");

  MHConfig cfg = opt.mh;
  cfg.seed = seed;
  Beta init;
  if (!opt.init.empty()) {
    init = opt.init;
  } else {
    init = grid_init(graph, data, default_init_grid(), cfg.solver);
    std::cerr << "grid_init selected beta = (" << init[0] << ", " << init[1] << ")\n";
  }
  return run_mh(graph, data, cfg, init);
}

void print_chain_summary(const PosteriorChain& chain) {
  std::printf("chain: %zu samples, burn-in %d, acceptance (post burn-in) %.3f\n",
              chain.size(), chain.config.burn_in, chain.post_burn_in_acceptance_rate());
  for (int k = 0; k < kNumFeatures; ++k) {
    const auto [lo, hi] = chain.central_interval(k, 0.95);
    std::printf("beta_%d: mean %.6g  sd %.3g  95%% interval [%.6g, %.6g]\n", k + 1,
                chain.posterior_mean(k), chain.posterior_sd(k), lo, hi);
  }
}

int cmd_synth(const GlobalOpts& g, const SynthSpec& spec_in) {
  SynthSpec spec = spec_in;
  spec.seed = g.seed;
  SynthWorld world = make_world(spec);
  Dataset corpus = make_corpus(world, spec);
  save_world(world, g.out_dir);
  save_trajectories(corpus, world.graph, out_path(g, "trajectories.csv"));
  std::printf("world: %zu sensors, %zu trips -> %s\n", world.graph.size(), corpus.size(),
              g.out_dir.c_str());
  return 0;
}

struct ImportOpts {
  std::string arcs_file, nodes_file, sensors_file, streams_file;
  int k_nearest = 10;
  double radius_km = 0.0;
  double cutoff_min = 30.0;
  std::size_t min_len = 6;
};

int cmd_import(const GlobalOpts& g, const ImportOpts& opt) {
  RoadNetwork road = load_road_network(opt.arcs_file, opt.nodes_file);
  const auto sensors = load_sensors(opt.sensors_file);
  const SuccessorPolicy policy = opt.radius_km > 0
                                     ? SuccessorPolicy::radius(opt.radius_km)
                                     : SuccessorPolicy::k_nearest(opt.k_nearest);
  SensorGraph graph = derive_sensor_graph(road, sensors, policy);
  save_sensor_graph(graph, out_path(g, "sensor_graph.csv"));

  Dataset streams = load_trajectories(opt.streams_file, graph);
  // A repeated detection at the same sensor is the same state.
  for (auto& t : streams.trajectories) {
    std::vector<LocationId> locs;
    std::vector<double> ts;
    for (std::size_t i = 0; i < t.locations.size(); ++i) {
      if (!locs.empty() && locs.back() == t.locations[i]) continue;
      locs.push_back(t.locations[i]);
      if (t.timestamps.has_value()) ts.push_back((*t.timestamps)[i]);
    }
    t.locations = std::move(locs);
    if (t.timestamps.has_value()) t.timestamps = std::move(ts);
  }
  Dataset trips = split_trips(streams, opt.cutoff_min, opt.min_len);
  save_trajectories(trips, graph, out_path(g, "trajectories.csv"));
  std::printf("imported: %zu sensors, %zu raw streams -> %zu trips\n", graph.size(),
              streams.size(), trips.size());
  return 0;
}

int cmd_fit(const GlobalOpts& g, const FitOpts& opt) {
  SensorGraph graph = load_graph(opt.graph_file, opt.sensors_file);
  Dataset data = load_trajectories(opt.traj_file, graph);
  PosteriorChain chain = fit_corpus(graph, data, opt, g.seed);
  write_posterior_csv(chain, out_path(g, "posterior.csv"));
  print_chain_summary(chain);
  return 0;
}

struct PredictOpts {
  std::string graph_file, sensors_file, traj_file, train_file, posterior_file;
  int burn_in = 2000;
  int thin = 10;
  int max_samples = 100;
  std::string prior = "informed";
  SolverConfig solver;
};

int cmd_predict(const GlobalOpts& g, const PredictOpts& opt) {
  SensorGraph graph = load_graph(opt.graph_file, opt.sensors_file);
  Dataset test = load_trajectories(opt.traj_file, graph);
  Dataset train = load_trajectories(opt.train_file, graph);
  PosteriorChain chain = read_posterior_csv(opt.posterior_file, opt.burn_in);
  const PriorMode mode =
      opt.prior == "uninformed" ? PriorMode::kUninformed : PriorMode::kInformed;
  PredictorState state = PredictorState::build(graph, chain, train, mode, opt.thin,
                                               opt.max_samples, opt.solver);

  std::vector<PredictionRecord> records;
  const DistanceFn distance = sensor_distance_fn(graph);
  EvalResult result = evaluate(
      test,
      ProbedPredictor([&](const Trajectory& prefix) {
        const auto probs = state.predictive_next_prob(prefix);
        const auto& succ = graph.successors(prefix.locations.back());
        std::size_t best = 0;
        for (std::size_t a = 1; a < probs.size(); ++a)
          if (probs[a] > probs[best]) best = a;
        return std::pair<LocationId, double>(succ[best], probs[best]);
      }),
      distance, "RU-IRL (" + opt.prior + ")", &records);
  write_predictions_csv(graph, records, out_path(g, "predictions.csv"));
  std::printf("%s", format_report_table({result}).c_str());
  return 0;
}

struct EvaluateOpts {
  FitOpts fit;
  int splits = 5;
  double ratio = 0.8;
  int thin = 10;
  int max_samples = 100;
};

int cmd_evaluate(const GlobalOpts& g, const EvaluateOpts& opt) {
  SensorGraph graph = load_graph(opt.fit.graph_file, opt.fit.sensors_file);
  Dataset data = load_trajectories(opt.fit.traj_file, graph);
  const DistanceFn distance = sensor_distance_fn(graph);

  std::vector<EvalResult> rows;
  std::map<std::string, EvalResult> averages;
  std::vector<std::string> method_order;
  std::vector<std::uint64_t> row_seeds;

  for (int split = 0; split < opt.splits; ++split) {
    const std::uint64_t split_seed = g.seed + static_cast<std::uint64_t>(split);
    auto [train, test] = train_test_split(data, opt.ratio, split_seed);
    PosteriorChain chain = fit_corpus(graph, train, opt.fit, split_seed);
    std::fprintf(stderr, "split %d: acceptance %.3f, beta mean (%.4g, %.4g)\n", split,
                 chain.post_burn_in_acceptance_rate(), chain.posterior_mean(0),
                 chain.posterior_mean(1));

    PredictorState informed = PredictorState::build(
        graph, chain, train, PriorMode::kInformed, opt.thin, opt.max_samples,
        opt.fit.mh.solver);
    PredictorState uninformed = PredictorState::build(
        graph, chain, train, PriorMode::kUninformed, opt.thin, opt.max_samples,
        opt.fit.mh.solver);
    MarkovModel markov = markov_fit(train);
    auto random_rng = std::make_shared<RandomStream>(
        substream(split_seed, "random_baseline"));

    std::vector<std::pair<std::string, NextLocationPredictor>> methods = {
        {"RU-IRL (informed)",
         [&](const Trajectory& p) { return informed.predict_next(p); }},
        {"RU-IRL (uninformed)",
         [&](const Trajectory& p) { return uninformed.predict_next(p); }},
        {"Markov",
         [&](const Trajectory& p) {
           return markov_predict(markov, graph, p.locations.back());
         }},
        {"NN (time)",
         [&](const Trajectory& p) {
           return nn_predict(graph, p.locations.back(), Metric::kTime);
         }},
        {"NN (distance)",
         [&](const Trajectory& p) {
           return nn_predict(graph, p.locations.back(), Metric::kDistance);
         }},
        {"Random",
         [&, random_rng](const Trajectory& p) {
           return random_predict(graph, p.locations.back(), *random_rng);
         }},
    };
    for (const auto& [name, predictor] : methods) {
      EvalResult r = evaluate(test, predictor, distance, name);
      rows.push_back(r);
      row_seeds.push_back(split_seed);
      auto it = averages.find(name);
      if (it == averages.end()) {
        method_order.push_back(name);
        averages.emplace(name, r);
      } else {
        it->second.acc += r.acc;
        it->second.acc_05 += r.acc_05;
        it->second.acc_10 += r.acc_10;
        it->second.n_predictions += r.n_predictions;
        it->second.n_trajectories += r.n_trajectories;
      }
    }
  }

  csv::Writer w(out_path(g, "report.csv"),
                "method,acc,acc_05,acc_10,n_locations,n_trajectories,seed");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    w.field(r.method)
        .field(r.acc)
        .field(r.acc_05)
        .field(r.acc_10)
        .field(static_cast<std::int64_t>(r.n_predictions))
        .field(static_cast<std::int64_t>(r.n_trajectories))
        .field(static_cast<std::int64_t>(row_seeds[i]));
    w.end_row();
  }

  std::vector<EvalResult> table;
  for (const auto& name : method_order) {
    EvalResult r = averages.at(name);
    r.acc /= opt.splits;
    r.acc_05 /= opt.splits;
    r.acc_10 /= opt.splits;
    table.push_back(r);
  }
  std::printf("average of %d train-test splits:\n%s", opt.splits,
              format_report_table(table).c_str());
  return 0;
}

struct TraceOpts {
  std::string posterior_file;
  int burn_in = 2000;
};

int cmd_trace(const GlobalOpts& g, const TraceOpts& opt) {
  PosteriorChain chain = read_posterior_csv(opt.posterior_file, opt.burn_in);
  for (int k = 0; k < kNumFeatures; ++k) {
    std::vector<double> all, post;
    for (std::size_t i = 0; i < chain.samples.size(); ++i) {
      all.push_back(chain.samples[i][k]);
      if (i > static_cast<std::size_t>(chain.config.burn_in)) post.push_back(all.back());
    }
    const std::string name = "beta_" + std::to_string(k + 1);
    plot_trace(all, "trace " + name, out_path(g, "trace_" + name + ".svg"));
    plot_histogram(post.empty() ? all : post, "posterior " + name,
                   out_path(g, "hist_" + name + ".svg"));
  }
  plot_trace(chain.log_posteriors, "trace log posterior",
             out_path(g, "trace_log_posterior.svg"));
  std::printf("wrote %d plot files to %s\n", 2 * kNumFeatures + 1, g.out_dir.c_str());
  return 0;
}

void add_mh_options(CLI::App* cmd, FitOpts& opt) {
  cmd->add_option("--graph", opt.graph_file, "sensor_graph.csv path")->required();
  cmd->add_option("--sensors", opt.sensors_file, "optional sensors.csv for coordinates");
  cmd->add_option("--trajectories", opt.traj_file, "trajectories.csv path")->required();
  cmd->add_option("--n_iter", opt.mh.n_iter, "MH iterations")->capture_default_str();
  cmd->add_option("--burn_in", opt.mh.burn_in, "burn-in iterations")->capture_default_str();
  cmd->add_option("--sigma_1", opt.mh.proposal_sigmas[0], "initial proposal sd for beta_1")
      ->capture_default_str();
  cmd->add_option("--sigma_2", opt.mh.proposal_sigmas[1], "initial proposal sd for beta_2")
      ->capture_default_str();
  cmd->add_option("--adapt_interval", opt.mh.adapt_interval,
                  "burn-in adaptation window (iterations)")
      ->capture_default_str();
  cmd->add_option("--target_accept", opt.mh.target_accept, "target acceptance rate")
      ->capture_default_str();
  cmd->add_option("--tolerance", opt.mh.solver.tolerance, "value solver tolerance")
      ->capture_default_str();
  cmd->add_option("--max_iterations", opt.mh.solver.max_iterations,
                  "value solver sweep cap")
      ->capture_default_str();
  cmd->add_option("--init", opt.init, "chain start beta_1,beta_2 (default: grid search)")
      ->delimiter(',')
      ->expected(kNumFeatures);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "RU-IRL: random-utility inverse reinforcement learning on sensor graphs.\n"
      "All randomness derives from --seed; outputs land in --out-dir\n"
      "(environment variable RUIRL_OUT_DIR, when set, overrides --out-dir)."};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  app.add_option("--seed", g.seed, "master random seed")->capture_default_str();
  app.add_option("--threads", g.threads,
                 "worker thread cap (evaluation currently runs single-threaded; "
                 "accepted for forward compatibility)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--out-dir", g.out_dir,
                 "output directory (overridden by RUIRL_OUT_DIR when set)")
      ->capture_default_str();
  app.set_config("--config", "", "key=value config file applying to global options");

  SynthSpec synth_spec;
  auto* synth = app.add_subcommand("synth", "generate a synthetic world and corpus");
  synth->set_config("--config", "", "key=value config file for synth options");
  synth->add_option("--grid_size", synth_spec.grid_size, "road grid side length")
      ->capture_default_str();
  synth->add_option("--n_sensors", synth_spec.n_sensors, "number of sensors")
      ->capture_default_str();
  synth->add_option("--k_successors", synth_spec.k_successors, "successor set size")
      ->capture_default_str();
  synth->add_option("--true_beta", synth_spec.true_beta, "ground-truth beta_1,beta_2")
      ->delimiter(',')
      ->expected(kNumFeatures)
      ->capture_default_str();
  synth->add_option("--n_trips", synth_spec.n_trips, "corpus size")->capture_default_str();
  std::string od_mode = "uniform";
  synth->add_option("--od_mode", od_mode, "origin-destination mode")
      ->check(CLI::IsMember({"uniform", "hub"}))
      ->capture_default_str();
  synth->add_option("--min_len", synth_spec.min_len, "resample trips shorter than this")
      ->capture_default_str();
  synth->add_option("--max_len", synth_spec.max_len,
                    "rollout rejection bound (0: 4x sensor count)")
      ->capture_default_str();

  ImportOpts import_opt;
  auto* import = app.add_subcommand("import", "build graph and trips from raw files");
  import->set_config("--config", "", "key=value config file for import options");
  import->add_option("--arcs", import_opt.arcs_file, "arcs.csv path")->required();
  import->add_option("--nodes", import_opt.nodes_file, "nodes.csv path")->required();
  import->add_option("--sensors", import_opt.sensors_file, "sensors.csv path")->required();
  import->add_option("--streams", import_opt.streams_file,
                     "raw detection streams (trajectories.csv schema, timestamps required)")
      ->required();
  import->add_option("--k_nearest", import_opt.k_nearest, "successor policy: k nearest")
      ->capture_default_str();
  import->add_option("--radius_km", import_opt.radius_km,
                     "successor policy: radius in km (overrides --k_nearest when > 0)")
      ->capture_default_str();
  import->add_option("--cutoff_min", import_opt.cutoff_min, "trip split gap in minutes")
      ->capture_default_str();
  import->add_option("--min_len", import_opt.min_len, "minimum detections per trip")
      ->capture_default_str();

  FitOpts fit_opt;
  auto* fit = app.add_subcommand("fit", "sample the posterior over beta");
  fit->set_config("--config", "", "key=value config file (n_iter, burn_in, sigma_1, ...)");
  add_mh_options(fit, fit_opt);

  PredictOpts predict_opt;
  auto* predict = app.add_subcommand("predict", "predict next locations on a test corpus");
  predict->set_config("--config", "", "key=value config file for predict options");
  predict->add_option("--graph", predict_opt.graph_file, "sensor_graph.csv path")
      ->required();
  predict->add_option("--sensors", predict_opt.sensors_file, "optional sensors.csv");
  predict->add_option("--trajectories", predict_opt.traj_file, "test trajectories.csv")
      ->required();
  predict->add_option("--train", predict_opt.train_file,
                      "training trajectories.csv (destination prior)")
      ->required();
  predict->add_option("--posterior", predict_opt.posterior_file, "posterior.csv path")
      ->required();
  predict->add_option("--burn_in", predict_opt.burn_in, "burn-in rows in the posterior")
      ->capture_default_str();
  predict->add_option("--thin", predict_opt.thin, "keep every thin-th sample")
      ->capture_default_str();
  predict->add_option("--max_samples", predict_opt.max_samples, "posterior draw cap")
      ->capture_default_str();
  predict->add_option("--prior", predict_opt.prior, "destination prior")
      ->check(CLI::IsMember({"informed", "uninformed"}))
      ->capture_default_str();
  predict->add_option("--tolerance", predict_opt.solver.tolerance, "value solver tolerance")
      ->capture_default_str();

  EvaluateOpts eval_opt;
  eval_opt.fit.mh.n_iter = 2000;
  eval_opt.fit.mh.burn_in = 500;
  auto* evaluate = app.add_subcommand(
      "evaluate", "train-test harness: fit, predict, and score all methods");
  evaluate->set_config("--config", "", "key=value config file for evaluate options");
  add_mh_options(evaluate, eval_opt.fit);
  evaluate->add_option("--splits", eval_opt.splits, "number of train-test splits")
      ->capture_default_str();
  evaluate->add_option("--ratio", eval_opt.ratio, "train fraction")->capture_default_str();
  evaluate->add_option("--thin", eval_opt.thin, "keep every thin-th posterior sample")
      ->capture_default_str();
  evaluate->add_option("--max_samples", eval_opt.max_samples, "posterior draw cap")
      ->capture_default_str();

  TraceOpts trace_opt;
  auto* trace = app.add_subcommand("trace", "plot chain traces and posterior histograms");
  trace->set_config("--config", "", "key=value config file for trace options");
  trace->add_option("--posterior", trace_opt.posterior_file, "posterior.csv path")
      ->required();
  trace->add_option("--burn_in", trace_opt.burn_in, "burn-in rows in the posterior")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  apply_env_overrides(g);

  try {
    if (synth->parsed()) {
      synth_spec.od_mode =
          od_mode == "hub" ? SynthSpec::ODMode::kHub : SynthSpec::ODMode::kUniform;
      return cmd_synth(g, synth_spec);
    }
    if (import->parsed()) return cmd_import(g, import_opt);
    if (fit->parsed()) return cmd_fit(g, fit_opt);
    if (predict->parsed()) return cmd_predict(g, predict_opt);
    if (evaluate->parsed()) return cmd_evaluate(g, eval_opt);
    if (trace->parsed()) return cmd_trace(g, trace_opt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
