#include "colldiff/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <tuple>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "colldiff/errors.hpp"
#include "colldiff/rng.hpp"
#include "csv_util.hpp"
#include "json_util.hpp"

namespace colldiff {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string real_or_nan(double v) { return std::isnan(v) ? "nan" : detail::format_real(v); }

}  // namespace

void ExperimentConfig::validate() const {
  if (network_sizes.empty()) throw ParameterError("experiment: no network sizes");
  for (int n : network_sizes) {
    if (n < edges_per_new_node + 1) {
      throw ParameterError("experiment: network size " + std::to_string(n) +
                           " is smaller than edges_per_new_node + 1");
    }
  }
  if (edges_per_new_node < 1) throw ParameterError("experiment: edges_per_new_node must be >= 1");
  if (!(log_p_min <= log_p_max && log_p_max < 0.0)) {
    throw ParameterError("experiment: log-probability range must satisfy lower <= upper < 0");
  }
  if (capacity < 1) throw ParameterError("experiment: capacity must be >= 1");
  if (!(seed_fraction > 0.0 && seed_fraction <= 1.0)) {
    throw ParameterError("experiment: seed_fraction must lie in (0, 1]");
  }
  if (seed_level_min < 1 || seed_level_max < seed_level_min) {
    throw ParameterError("experiment: seed level range must satisfy 1 <= min <= max");
  }
  if (cascade_counts.empty()) throw ParameterError("experiment: no cascade counts");
  for (std::size_t c : cascade_counts) {
    if (c == 0) throw ParameterError("experiment: cascade counts must be >= 1");
  }
  if (runs < 1) throw ParameterError("experiment: runs must be >= 1");
  for (double r : rho_sweep) {
    if (!(r >= 0.0)) throw ParameterError("experiment: rho sweep values must be >= 0");
  }
  solver.validate();
}

std::vector<double> ExperimentConfig::rhos() const {
  return rho_sweep.empty() ? std::vector<double>{solver.rho} : rho_sweep;
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
  using detail::Json;
  const Json doc = detail::parse_json(text, "experiment config");
  if (!doc.is_object()) throw ParseError("experiment config: top level must be an object");
  static const std::set<std::string> known = {
      "network_sizes", "edges_per_new_node", "log_p_range", "capacity", "seed_fraction",
      "seed_level_range", "cascade_counts", "runs", "solver", "rho_sweep", "output_dir",
      "master_seed"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) throw ParseError("experiment config: unknown field '" + key + "'");
  }
  ExperimentConfig c;
  auto field = [&](const char* key) -> const Json* {
    auto it = doc.find(key);
    return it == doc.end() ? nullptr : &*it;
  };
  const std::string w = "experiment config.";
  if (auto* v = field("network_sizes")) c.network_sizes = detail::get_as<std::vector<int>>(*v, w + "network_sizes");
  if (auto* v = field("edges_per_new_node")) c.edges_per_new_node = static_cast<int>(detail::get_integer(*v, w + "edges_per_new_node"));
  if (auto* v = field("log_p_range")) {
    const auto r = detail::get_as<std::vector<double>>(*v, w + "log_p_range");
    if (r.size() != 2) throw ParseError(w + "log_p_range: expected [lower, upper]");
    c.log_p_min = r[0];
    c.log_p_max = r[1];
  }
  if (auto* v = field("capacity")) c.capacity = static_cast<int>(detail::get_integer(*v, w + "capacity"));
  if (auto* v = field("seed_fraction")) c.seed_fraction = detail::get_number(*v, w + "seed_fraction");
  if (auto* v = field("seed_level_range")) {
    const auto r = detail::get_as<std::vector<int>>(*v, w + "seed_level_range");
    if (r.size() != 2) throw ParseError(w + "seed_level_range: expected [min, max]");
    c.seed_level_min = r[0];
    c.seed_level_max = r[1];
  }
  if (auto* v = field("cascade_counts")) c.cascade_counts = detail::get_as<std::vector<std::size_t>>(*v, w + "cascade_counts");
  if (auto* v = field("runs")) c.runs = static_cast<int>(detail::get_integer(*v, w + "runs"));
  if (auto* v = field("rho_sweep")) c.rho_sweep = detail::get_as<std::vector<double>>(*v, w + "rho_sweep");
  if (auto* v = field("output_dir")) c.output_dir = detail::get_as<std::string>(*v, w + "output_dir");
  if (auto* v = field("master_seed")) c.master_seed = detail::get_as<std::uint64_t>(*v, w + "master_seed");
  if (auto* v = field("solver")) {
    if (!v->is_object()) throw ParseError(w + "solver: expected an object");
    static const std::set<std::string> solver_keys = {
        "rho", "tolerance", "max_iterations", "edge_threshold", "initial_p", "max_p"};
    for (const auto& [key, value] : v->items()) {
      if (!solver_keys.count(key)) throw ParseError(w + "solver: unknown field '" + key + "'");
    }
    const std::string ws = w + "solver.";
    if (auto it = v->find("rho"); it != v->end()) c.solver.rho = detail::get_number(*it, ws + "rho");
    if (auto it = v->find("tolerance"); it != v->end()) c.solver.tolerance = detail::get_number(*it, ws + "tolerance");
    if (auto it = v->find("max_iterations"); it != v->end()) c.solver.max_iterations = static_cast<int>(detail::get_integer(*it, ws + "max_iterations"));
    if (auto it = v->find("edge_threshold"); it != v->end()) c.solver.edge_threshold = detail::get_number(*it, ws + "edge_threshold");
    if (auto it = v->find("initial_p"); it != v->end()) c.solver.initial_p = detail::get_number(*it, ws + "initial_p");
    if (auto it = v->find("max_p"); it != v->end()) c.solver.max_p = detail::get_number(*it, ws + "max_p");
  }
  try {
    c.validate();
  } catch (const ParameterError& e) {
    throw ParseError(e.what());
  }
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  try {
    return experiment_config_from_json(detail::read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
  detail::Json doc;
  doc["network_sizes"] = c.network_sizes;
  doc["edges_per_new_node"] = c.edges_per_new_node;
  doc["log_p_range"] = {c.log_p_min, c.log_p_max};
  doc["capacity"] = c.capacity;
  doc["seed_fraction"] = c.seed_fraction;
  doc["seed_level_range"] = {c.seed_level_min, c.seed_level_max};
  doc["cascade_counts"] = c.cascade_counts;
  doc["runs"] = c.runs;
  doc["solver"] = {{"rho", c.solver.rho},
                   {"tolerance", c.solver.tolerance},
                   {"max_iterations", c.solver.max_iterations},
                   {"edge_threshold", c.solver.edge_threshold},
                   {"initial_p", c.solver.initial_p},
                   {"max_p", c.solver.max_p}};
  doc["rho_sweep"] = c.rho_sweep;
  doc["output_dir"] = c.output_dir.string();
  doc["master_seed"] = c.master_seed;
  return doc.dump(2) + "\n";
}

std::string RunRow::run_id() const {
  std::ostringstream out;
  out << "n" << nodes << "-c" << cascades << "-r" << run << "-rho" << detail::format_real(rho);
  return out.str();
}

ExperimentReport run_experiment(const ExperimentConfig& config, unsigned threads,
                                std::ostream* progress) {
  config.validate();
  const Rng master(config.master_seed);
  const std::size_t max_cascades =
      *std::max_element(config.cascade_counts.begin(), config.cascade_counts.end());
  const SeedSampling seeding{config.seed_fraction, config.seed_level_min, config.seed_level_max};

  ExperimentReport report;
  for (std::size_t s = 0; s < config.network_sizes.size(); ++s) {
    const int nodes = config.network_sizes[s];
    for (int run = 0; run < config.runs; ++run) {
      // Substream layout: 2 per (size, run) pair.
      const std::uint64_t stream = 2 * (s * static_cast<std::uint64_t>(config.runs) +
                                        static_cast<std::uint64_t>(run));
      const std::uint64_t net_seed = master.substream(stream).seed();
      const std::uint64_t cascade_seed = master.substream(stream + 1).seed();

      auto fail_all = [&](const std::string& why) {
        for (std::size_t count : config.cascade_counts) {
          for (double rho : config.rhos()) {
            RunRow row{nodes, count, run, rho, {}, kNaN, why};
            report.runs.push_back(row);
          }
        }
      };

      Network truth;
      std::vector<Cascade> cascades;
      try {
        PreferentialAttachmentParams params{nodes, config.edges_per_new_node, config.log_p_min,
                                            config.log_p_max, config.capacity};
        truth = generate_preferential_attachment(params, net_seed);
        cascades = simulate_batch(truth, seeding, max_cascades, cascade_seed, threads);
      } catch (const Error& e) {
        fail_all(e.what());
        continue;
      }

      for (std::size_t count : config.cascade_counts) {
        const std::span<const Cascade> used(cascades.data(), count);
        for (double rho : config.rhos()) {
          RunRow row{nodes, count, run, rho, {}, kNaN, "ok"};
          const auto start = std::chrono::steady_clock::now();
          try {
            SolverConfig solver = config.solver;
            solver.rho = rho;
            const InferredNetwork inferred = learn_structure(used, truth.capacities(), solver, threads);
            row.metrics = structure_metrics(truth, inferred, solver.edge_threshold);
            const auto tp = true_positive_edges(truth, inferred, solver.edge_threshold);
            if (!tp.empty()) row.error_percent = parameter_error(truth, inferred, tp);
          } catch (const Error& e) {
            row.status = e.what();
          }
          const double secs =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
          if (progress) {
            *progress << row.run_id() << ": precision " << row.metrics.precision << " recall "
                    << row.metrics.recall << " f1 " << row.metrics.f1 << " error% "
                      << row.error_percent << " (" << secs << " s)" << std::endl;
          }
          report.runs.push_back(std::move(row));
        }
      }
    }
  }
  report.aggregates = aggregate_runs(report.runs);
  return report;
}

std::vector<AggregateRow> aggregate_runs(const std::vector<RunRow>& runs) {
  struct Acc {
    AggregateRow row;
    int error_count = 0;
  };
  std::map<std::tuple<int, std::size_t, double>, Acc> groups;
  for (const RunRow& r : runs) {
    Acc& acc = groups[{r.nodes, r.cascades, r.rho}];
    acc.row.nodes = r.nodes;
    acc.row.cascades = r.cascades;
    acc.row.rho = r.rho;
    if (!r.ok()) continue;
    ++acc.row.runs_ok;
    acc.row.precision += r.metrics.precision;
    acc.row.recall += r.metrics.recall;
    acc.row.f1 += r.metrics.f1;
    if (!std::isnan(r.error_percent)) {
      acc.row.error_percent += r.error_percent;
      ++acc.error_count;
    }
  }
  std::vector<AggregateRow> out;
  for (auto& [key, acc] : groups) {
    AggregateRow row = acc.row;
    if (row.runs_ok > 0) {
      row.precision /= row.runs_ok;
      row.recall /= row.runs_ok;
      row.f1 /= row.runs_ok;
    } else {
      row.precision = row.recall = row.f1 = kNaN;
    }
    row.error_percent = acc.error_count > 0 ? row.error_percent / acc.error_count : kNaN;
    out.push_back(row);
  }
  return out;
}

void write_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ostringstream out;
    out << "run_id,nodes,cascades,run,rho,precision,recall,f1,error_percent,true_positives,"
           "false_positives,false_negatives,status\n";
    for (const RunRow& r : report.runs) {
      std::string status = r.status;
      std::replace(status.begin(), status.end(), ',', ';');
      std::replace(status.begin(), status.end(), '\n', ' ');
      out << r.run_id() << ',' << r.nodes << ',' << r.cascades << ',' << r.run << ','
          << detail::format_real(r.rho) << ',' << real_or_nan(r.metrics.precision) << ','
          << real_or_nan(r.metrics.recall) << ',' << real_or_nan(r.metrics.f1) << ','
          << real_or_nan(r.error_percent) << ',' << r.metrics.true_positives << ','
          << r.metrics.false_positives << ',' << r.metrics.false_negatives << ',' << status
          << '\n';
    }
    detail::write_text_file(dir / "runs.csv", out.str());
  }
  {
    std::ostringstream out;
    out << "nodes,cascades,rho,runs_ok,precision,recall,f1,error_percent\n";
    for (const AggregateRow& a : report.aggregates) {
      out << a.nodes << ',' << a.cascades << ',' << detail::format_real(a.rho) << ','
          << a.runs_ok << ',' << real_or_nan(a.precision) << ',' << real_or_nan(a.recall) << ','
          << real_or_nan(a.f1) << ',' << real_or_nan(a.error_percent) << '\n';
    }
    detail::write_text_file(dir / "aggregate.csv", out.str());
  }
  const std::pair<const char*, double AggregateRow::*> metrics[] = {
      {"precision", &AggregateRow::precision},
      {"recall", &AggregateRow::recall},
      {"f1", &AggregateRow::f1},
      {"error_percent", &AggregateRow::error_percent}};
  for (const auto& [name, member] : metrics) {
    std::ostringstream out;
    out << "nodes,rho,cascades," << name << '\n';
    for (const AggregateRow& a : report.aggregates) {
      out << a.nodes << ',' << detail::format_real(a.rho) << ',' << a.cascades << ','
          << real_or_nan(a.*member) << '\n';
    }
    detail::write_text_file(dir / ("plotdata_" + std::string(name) + ".csv"), out.str());
  }
}

RegionObservations ingest_region_counts(const std::filesystem::path& counts,
                                        const std::filesystem::path& capacities) {
  const auto cap_file = detail::read_csv(capacities, {"region_id", "capacity"});
  std::map<long long, int> cap_of;
  for (const auto& row : cap_file.rows) {
    const long long id = detail::parse_int(row.fields[0], capacities, row.line, "region_id");
    const long long cap = detail::parse_int(row.fields[1], capacities, row.line, "capacity");
    if (cap < 1 || cap > std::numeric_limits<int>::max()) {
      throw ParseError(capacities.string() + ":" + std::to_string(row.line) +
                       ": capacity must be a positive integer");
    }
    if (!cap_of.emplace(id, static_cast<int>(cap)).second) {
      throw ParseError(capacities.string() + ":" + std::to_string(row.line) +
                       ": duplicate region " + std::to_string(id));
    }
  }

  const auto file = detail::read_csv(counts, {"region_id", "week", "count"});
  std::map<long long, std::map<int, int>> grid;
  std::set<int> weeks;
  for (const auto& row : file.rows) {
    const long long region = detail::parse_int(row.fields[0], counts, row.line, "region_id");
    const long long week = detail::parse_int(row.fields[1], counts, row.line, "week");
    const long long count = detail::parse_int(row.fields[2], counts, row.line, "count");
    const std::string at = counts.string() + ":" + std::to_string(row.line);
    if (week < 1 || week > 53) throw ParseError(at + ": week must lie in 1..53");
    if (count < 0) throw ParseError(at + ": count must be non-negative");
    const auto cap = cap_of.find(region);
    if (cap == cap_of.end()) {
      throw DataError(at + ": region " + std::to_string(region) + " has no capacity");
    }
    if (count > cap->second) {
      throw DataError(at + ": region " + std::to_string(region) + " week " +
                      std::to_string(week) + " count " + std::to_string(count) +
                      " exceeds capacity " + std::to_string(cap->second));
    }
    if (!grid[region].emplace(static_cast<int>(week), static_cast<int>(count)).second) {
      throw ParseError(at + ": duplicate row for region " + std::to_string(region) + " week " +
                       std::to_string(week));
    }
    weeks.insert(static_cast<int>(week));
  }
  if (grid.empty()) throw DataError(counts.string() + ": no observations");

  const int cycle = weeks.count(53) ? 53 : 52;
  auto pred = [cycle](int w) { return w == 1 ? cycle : w - 1; };
  auto succ = [cycle](int w) { return w == cycle ? 1 : w + 1; };
  std::vector<int> starts;
  for (int w : weeks) {
    if (!weeks.count(pred(w))) starts.push_back(w);
  }
  const std::string first_region = std::to_string(grid.begin()->first);
  if (starts.size() > 1) {
    // The union of weeks has a hole; report the first missing week after
    // the earliest run.
    int w = starts.front();
    while (weeks.count(w)) w = succ(w);
    throw DataError(counts.string() + ": region " + first_region + " has no count for week " +
                    std::to_string(w) + " (gap in the weekly series)");
  }
  std::vector<int> order;
  if (starts.empty()) {
    for (int w = 1; w <= cycle; ++w) order.push_back(w);  // a full year
  } else {
    for (int w = starts.front(); weeks.count(w) && order.size() < weeks.size(); w = succ(w)) {
      order.push_back(w);
    }
  }

  RegionObservations obs;
  obs.weeks = order;
  for (const auto& [id, cap] : cap_of) {
    obs.region_ids.push_back(id);
    obs.capacities.push_back(cap);
  }
  obs.levels.assign(order.size(), std::vector<int>(obs.region_ids.size(), 0));
  for (std::size_t r = 0; r < obs.region_ids.size(); ++r) {
    const auto it = grid.find(obs.region_ids[r]);
    for (std::size_t t = 0; t < order.size(); ++t) {
      if (it == grid.end() || !it->second.count(order[t])) {
        throw DataError(counts.string() + ": region " + std::to_string(obs.region_ids[r]) +
                        " has no count for week " + std::to_string(order[t]) +
                        " (gap in the weekly series)");
      }
      obs.levels[t][r] = it->second.at(order[t]);
    }
  }
  return obs;
}

void write_region_counts(const RegionObservations& obs, const std::filesystem::path& counts,
                         const std::filesystem::path& capacities) {
  std::ostringstream caps;
  caps << "region_id,capacity\n";
  for (std::size_t r = 0; r < obs.region_ids.size(); ++r) {
    caps << obs.region_ids[r] << ',' << obs.capacities[r] << '\n';
  }
  detail::write_text_file(capacities, caps.str());
  std::ostringstream out;
  out << "region_id,week,count\n";
  for (std::size_t r = 0; r < obs.region_ids.size(); ++r) {
    for (std::size_t t = 0; t < obs.weeks.size(); ++t) {
      out << obs.region_ids[r] << ',' << obs.weeks[t] << ',' << obs.levels[t][r] << '\n';
    }
  }
  detail::write_text_file(counts, out.str());
}

}  // namespace colldiff
