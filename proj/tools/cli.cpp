#include "cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>

#include "colldiff/errors.hpp"
#include "colldiff/eval.hpp"
#include "colldiff/flow.hpp"
#include "colldiff/graph.hpp"
#include "colldiff/harness.hpp"
#include "colldiff/infer.hpp"
#include "colldiff/simulate.hpp"

namespace colldiff::cli {
namespace {

namespace fs = std::filesystem;

struct Globals {
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

struct SolverFlags {
  SolverConfig config;

  void attach(CLI::App* cmd, double default_rho) {
    config.rho = default_rho;
    cmd->add_option("--rho", config.rho, "Sparsity penalty weight (>= 0)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("--epsilon", config.edge_threshold,
                    "Edge detection threshold on estimated probabilities")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("--tolerance", config.tolerance,
                    "Projected-gradient infinity-norm tolerance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--max-iterations", config.max_iterations, "Solver iteration cap per node")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--initial-p", config.initial_p, "Initial probability for every candidate")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--max-p", config.max_p, "Largest probability the solver may reach")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
  }
};

std::vector<int> capacities_from(const std::string& network, const std::string& capacities) {
  if (!network.empty()) {
    const Network net = load_network(network);
    return {net.capacities().begin(), net.capacities().end()};
  }
  return load_capacities(capacities);
}

void write_or_print(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw DataError("cannot write '" + path + "'");
  file << text;
}

int run_guarded(const std::function<void()>& body, std::ostream& err) {
  try {
    body();
    return kOk;
  } catch (const SolverError& e) {
    err << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Collective diffusion simulation, structure learning and flow estimation",
               "colldiff"};
  app.require_subcommand(1);
  Globals globals;
  app.add_option("--seed", globals.seed, "Master random seed; all randomness derives from it")
      ->capture_default_str();
  app.add_option("--threads", globals.threads, "Worker threads (0 = available parallelism)")
      ->capture_default_str();

  std::function<void()> action;

  // generate
  auto* generate = app.add_subcommand("generate", "Generate a preferential-attachment network");
  PreferentialAttachmentParams gen;
  std::string gen_out;
  generate->add_option("--nodes", gen.nodes, "Number of nodes")->required()->check(CLI::PositiveNumber);
  generate->add_option("--edges-per-node", gen.edges_per_new_node,
                       "Links added by every new node")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  generate->add_option("--log-p-min", gen.log_p_min, "Lower end of ln p")->capture_default_str();
  generate->add_option("--log-p-max", gen.log_p_max, "Upper end of ln p (< 0)")->capture_default_str();
  generate->add_option("--capacity", gen.capacity, "Capacity of every node")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  generate->add_option("--out", gen_out, "Output network file (stdout when omitted)");
  generate->callback([&] {
    action = [&] {
      const Network net = generate_preferential_attachment(gen, globals.seed);
      write_or_print(gen_out, network_to_json(net), out);
    };
  });

  // layered
  auto* layered_cmd = app.add_subcommand("layered", "Expand a network into time layers");
  std::string lay_network, lay_out;
  int lay_horizon = 1;
  layered_cmd->add_option("--network", lay_network, "Base network file")->required();
  layered_cmd->add_option("--horizon", lay_horizon, "Number of layer transitions T")
      ->required()
      ->check(CLI::PositiveNumber);
  layered_cmd->add_option("--out", lay_out, "Output file for the expanded network");
  layered_cmd->callback([&] {
    action = [&] {
      const LayeredNetwork layered = build_layered(load_network(lay_network), lay_horizon);
      write_or_print(lay_out, network_to_json(layered.flatten()), out);
    };
  });

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Simulate a batch of progressive cascades");
  std::string sim_network, sim_out, sim_seeds;
  std::size_t sim_count = 1;
  SeedSampling sampling;
  simulate->add_option("--network", sim_network, "Network file")->required();
  simulate->add_option("--cascades", sim_count, "Number of cascades")
      ->required()
      ->check(CLI::PositiveNumber);
  simulate->add_option("--seed-fraction", sampling.fraction, "Fraction of nodes seeded per cascade")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  simulate->add_option("--seed-level-min", sampling.min_level, "Smallest seed activation level")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  simulate->add_option("--seed-level-max", sampling.max_level, "Largest seed activation level")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  simulate->add_option("--seeds", sim_seeds,
                       "Fixed seeds (`layer,node_id,level` file, layer 0 rows with level >= 1); "
                       "overrides the sampling flags");
  simulate->add_option("--out", sim_out, "Output cascade trace file")->required();
  simulate->callback([&] {
    action = [&] {
      const Network net = load_network(sim_network);
      SeedSpec spec = sampling;
      if (!sim_seeds.empty()) {
        const LayerLevels fixed = load_layer_levels(sim_seeds);
        std::vector<Seed> seeds;
        for (std::size_t i = 0; i < fixed.front().size(); ++i) {
          if (fixed.front()[i] > 0) seeds.push_back({static_cast<NodeId>(i), fixed.front()[i]});
        }
        spec = seeds;
      }
      const auto cascades = simulate_batch(net, spec, sim_count, globals.seed, globals.threads);
      save_cascades(cascades, sim_out, sim_network);
    };
  });

  // simulate-layered
  auto* sim_layered = app.add_subcommand("simulate-layered",
                                         "Simulate a non-progressive process on layered copies");
  std::string sl_network, sl_initial, sl_out;
  int sl_layers = 1;
  sim_layered->add_option("--network", sl_network, "Base network file (self-loops need layered: true)")
      ->required();
  sim_layered->add_option("--layers", sl_layers, "Number of layer transitions")
      ->required()
      ->check(CLI::PositiveNumber);
  sim_layered->add_option("--initial", sl_initial,
                          "Layer-0 levels as a `layer,node_id,level` file")
      ->required();
  sim_layered->add_option("--out", sl_out, "Output layer observation file")->required();
  sim_layered->callback([&] {
    action = [&] {
      const LayeredNetwork layered = build_layered(load_network(sl_network), sl_layers);
      const LayerLevels initial = load_layer_levels(sl_initial);
      save_layer_levels(simulate_layered(layered, initial.front(), globals.seed), sl_out);
    };
  });

  // learn
  auto* learn = app.add_subcommand("learn", "Learn structure and probabilities from cascades");
  std::string ln_cascades, ln_network, ln_caps, ln_out, ln_diag, ln_truth;
  std::vector<double> ln_sweep;
  SolverFlags ln_solver;
  learn->add_option("--cascades", ln_cascades, "Cascade trace file")->required();
  auto* ln_net_opt = learn->add_option("--network", ln_network, "Network file to take capacities from");
  auto* ln_cap_opt = learn->add_option("--capacities", ln_caps, "Capacities file (`node_id,capacity`)");
  ln_net_opt->excludes(ln_cap_opt);
  learn->add_option("--out", ln_out, "Output inferred network file");
  learn->add_option("--diagnostics", ln_diag, "Per-node solver diagnostics file");
  learn->add_option("--rho-sweep", ln_sweep,
                    "Learn once per listed rho and print a summary table instead of a network")
      ->delimiter(',');
  learn->add_option("--truth", ln_truth, "True network; adds metrics to the rho sweep table");
  ln_solver.attach(learn, 1.0);
  learn->callback([&] {
    if (ln_network.empty() && ln_caps.empty()) {
      throw CLI::ValidationError("learn", "one of --network or --capacities is required");
    }
    if (ln_sweep.empty() && ln_out.empty()) {
      throw CLI::ValidationError("learn", "--out is required unless --rho-sweep is given");
    }
    for (double r : ln_sweep) {
      if (!(r >= 0.0)) throw CLI::ValidationError("--rho-sweep", "values must be >= 0");
    }
    action = [&] {
      const auto cascades = load_cascades(ln_cascades);
      const auto caps = capacities_from(ln_network, ln_caps);
      if (ln_sweep.empty()) {
        const InferredNetwork inferred = learn_structure(cascades, caps, ln_solver.config, globals.threads);
        save_network(inferred.to_network(), ln_out);
        if (!ln_diag.empty()) save_diagnostics(inferred, ln_diag);
        return;
      }
      std::optional<Network> truth;
      if (!ln_truth.empty()) truth = load_network(ln_truth);
      out << "rho,detected_edges";
      if (truth) out << ",precision,recall,f1,error_percent";
      out << '\n';
      for (double rho : ln_sweep) {
        SolverConfig cfg = ln_solver.config;
        cfg.rho = rho;
        const InferredNetwork inferred = learn_structure(cascades, caps, cfg, globals.threads);
        out << rho << ',' << inferred.detected.size();
        if (truth) {
          const Metrics m = structure_metrics(*truth, inferred, cfg.edge_threshold);
          const auto tp = true_positive_edges(*truth, inferred, cfg.edge_threshold);
          const double error = tp.empty() ? NAN : parameter_error(*truth, inferred, tp);
          out << ',' << m.precision << ',' << m.recall << ',' << m.f1 << ',' << error;
        }
        out << '\n';
      }
    };
  });

  // learn-layered
  auto* learn_layered = app.add_subcommand(
      "learn-layered", "Learn tied per-edge probabilities from layer observations");
  std::string ll_network, ll_obs, ll_out, ll_diag;
  SolverFlags ll_solver;
  learn_layered->add_option("--network", ll_network,
                            "Base network whose edges are the candidate parents")
      ->required();
  learn_layered->add_option("--observations", ll_obs, "Layer observation file")->required();
  learn_layered->add_option("--out", ll_out, "Output inferred base network")->required();
  learn_layered->add_option("--diagnostics", ll_diag, "Per-node solver diagnostics file");
  ll_solver.attach(learn_layered, 0.0);
  learn_layered->callback([&] {
    action = [&] {
      const Network base = load_network(ll_network);
      const InferredNetwork inferred =
          learn_tied_layered(base, load_layer_levels(ll_obs), ll_solver.config, globals.threads);
      save_network(inferred.to_network(), ll_out);
      if (!ll_diag.empty()) save_diagnostics(inferred, ll_diag);
    };
  });

  // eval
  auto* eval = app.add_subcommand("eval", "Compare an inferred network with the truth");
  std::string ev_truth, ev_inferred, ev_out, ev_run = "run";
  double ev_eps = 1e-4;
  std::size_t ev_cascades = 0;
  eval->add_option("--truth", ev_truth, "True network file")->required();
  eval->add_option("--inferred", ev_inferred, "Inferred network file")->required();
  eval->add_option("--epsilon", ev_eps, "Edge detection threshold")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  eval->add_option("--run-id", ev_run, "Run identifier for the metrics row")->capture_default_str();
  eval->add_option("--cascades", ev_cascades, "Cascade count recorded in the metrics row")
      ->capture_default_str();
  eval->add_option("--out", ev_out, "Metrics file (stdout when omitted)");
  eval->callback([&] {
    action = [&] {
      const Network truth = load_network(ev_truth);
      const Network inferred = load_network(ev_inferred);
      MetricsRow row{ev_run, ev_cascades, structure_metrics(truth, inferred, ev_eps), NAN};
      std::vector<EdgeKey> tp;
      for (const Edge& e : inferred.edges()) {
        if (e.p >= ev_eps && truth.probability(e.src, e.dst) > 0.0) tp.emplace_back(e.src, e.dst);
      }
      if (!tp.empty()) row.error_percent = parameter_error(truth, inferred, tp);
      write_or_print(ev_out, metrics_header() + "\n" + format_metrics_row(row) + "\n", out);
    };
  });

  // flow-fit
  auto* flow_fit = app.add_subcommand("flow-fit", "Turn probabilities from complete flow tables");
  std::string ff_in, ff_out;
  flow_fit->add_option("--instances", ff_in, "Flow instance file; every instance needs a table")
      ->required();
  flow_fit->add_option("--out", ff_out, "Output turn probability file")->required();
  flow_fit->callback([&] {
    action = [&] {
      const auto instances = load_flow_instances(ff_in);
      if (instances.empty()) throw DataError(ff_in + ": no instances");
      std::vector<FlowTable> tables;
      std::vector<double> ll;
      for (std::size_t c = 0; c < instances.size(); ++c) {
        if (!instances[c].table) {
          throw DataError(ff_in + ": instance " + std::to_string(c) + " has no table");
        }
        if (instances[c].adjacency != instances.front().adjacency) {
          throw DataError(ff_in + ": instance " + std::to_string(c) + " has a different adjacency");
        }
        tables.push_back(*instances[c].table);
      }
      const TurnProbabilities p = complete_data_mle(instances.front().adjacency, tables);
      double total = 0.0;
      for (const auto& inst : instances) total += flow_log_likelihood(inst, *inst.table, p);
      ll.push_back(total);
      save_turn_probabilities(p, ll, ff_out);
    };
  });

  // flow-em
  auto* flow_em = app.add_subcommand("flow-em", "Turn probabilities from margins by exact EM");
  std::string fe_in, fe_out;
  EmConfig em;
  flow_em->add_option("--instances", fe_in, "Flow instance file (tables ignored)")->required();
  flow_em->add_option("--out", fe_out, "Output turn probability file")->required();
  flow_em->add_option("--max-iterations", em.max_iterations, "EM iteration cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  flow_em->add_option("--tolerance", em.tolerance, "Stop when the log-likelihood gain is below this")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  flow_em->add_option("--table-cap", em.table_cap, "Largest table count enumerated per instance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  flow_em->callback([&] {
    action = [&] {
      auto instances = load_flow_instances(fe_in);
      for (auto& inst : instances) inst.table.reset();
      const EmResult result = em_fit(instances, em);
      save_turn_probabilities(result.p, result.log_likelihood, fe_out);
      err << "flow-em: " << result.iterations << " iterations, log-likelihood "
          << result.log_likelihood.back() << (result.converged ? "" : " (not converged)") << '\n';
    };
  });

  // experiment
  auto* experiment = app.add_subcommand("experiment", "Run the synthetic recovery study");
  std::string ex_config, ex_out;
  experiment->add_option("--config", ex_config, "Experiment config file")->required();
  experiment->add_option("--out-dir", ex_out, "Report directory (overrides the config)");
  experiment->callback([&] {
    action = [&] {
      ExperimentConfig config = load_experiment_config(ex_config);
      if (!ex_out.empty()) config.output_dir = ex_out;
      if (app.get_option("--seed")->count() > 0) config.master_seed = globals.seed;
      const ExperimentReport report = run_experiment(config, globals.threads, &err);
      write_report(report, config.output_dir);
    };
  });

  // ingest-regions
  auto* ingest = app.add_subcommand("ingest-regions",
                                    "Turn weekly region counts into layer observations");
  std::string ig_counts, ig_caps, ig_obs, ig_net;
  ingest->add_option("--counts", ig_counts, "`region_id,week,count` file")->required();
  ingest->add_option("--capacities", ig_caps, "`region_id,capacity` file")->required();
  ingest->add_option("--out-observations", ig_obs, "Output layer observation file")->required();
  ingest->add_option("--out-network", ig_net,
                     "Output fully connected base network with self-loops")
      ->required();
  ingest->callback([&] {
    action = [&] {
      const RegionObservations obs = ingest_region_counts(ig_counts, ig_caps);
      save_layer_levels(obs.levels, ig_obs);
      save_network(obs.base_network(), ig_net);
      err << "ingest-regions: " << obs.region_ids.size() << " regions, " << obs.weeks.size()
          << " weeks (" << obs.weeks.front() << " .. " << obs.weeks.back() << ")\n";
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }
  if (!action) return kUsage;
  return run_guarded(action, err);
}

}  // namespace colldiff::cli
