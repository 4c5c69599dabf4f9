#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "fmuxnet/errors.hpp"
#include "fmuxnet/harness.hpp"
#include "fmuxnet/io.hpp"

using namespace fmuxnet;
namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string config;
  std::string model;
  std::string graph;
  std::string schedules;
  std::string trees;
  std::string policy;
  std::string function;
  int k = 2;
  int alphabet = 16;
  std::vector<double> lambdas;
  std::vector<std::uint64_t> seeds;
  double horizon = 0.0;
  double sample_every = 0.0;
  std::string arrivals;
  int batch = 1;
  std::string rate_units;
  std::string output_dir;
  unsigned threads = 0;
  bool allow_cyclic = false;
  bool check_invariants = false;
  std::size_t window = 0;
  double cap_factor = 0.0;
};

void add_experiment_options(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "Experiment config JSON");
  app->add_option("--model", o.model, "wireline or wireless")
      ->check(CLI::IsMember({"wireline", "wireless"}));
  app->add_option("--graph", o.graph, "Graph JSON file");
  app->add_option("--schedules", o.schedules, "Schedule set JSON file (wireless)");
  app->add_option("--trees", o.trees, "all, star, or a tree list JSON file (wireless)");
  app->add_option("--policy", o.policy,
                  "random-useful | greedy-maxweight | static-sss | single-tree | fixed-split");
  app->add_option("--function", o.function, "parity, max or kth");
  app->add_option("--k", o.k, "Order statistic for kth");
  app->add_option("--alphabet", o.alphabet, "Alphabet size for max and kth");
  app->add_option("--horizon", o.horizon, "Simulated time units (wireline) or slots (wireless)");
  app->add_option("--sample-every", o.sample_every, "Sampling interval");
  app->add_option("--arrivals", o.arrivals, "poisson, bernoulli_batch or deterministic (wireless)");
  app->add_option("--batch", o.batch, "Batch size for bernoulli_batch arrivals");
  app->add_option("--rate-units", o.rate_units, "packets or bits")->check(CLI::IsMember({"packets", "bits"}));
  app->add_option("--window", o.window, "Stability detector window, in samples");
  app->add_option("--cap-factor", o.cap_factor, "Queue cap factor (Q_cap = factor * lambda * N)");
  app->add_flag("--allow-cyclic", o.allow_cyclic, "Run the wireline model on a cyclic graph");
  app->add_flag("--check-invariants", o.check_invariants, "Assert runtime invariants");
}

ExperimentConfig build_config(const Overrides& o, std::string& base_dir) {
  json doc = json::object();
  if (!o.config.empty()) {
    doc = read_json_file(o.config);
    base_dir = fs::path(o.config).parent_path().string();
  }
  if (!o.graph.empty()) doc["graph"] = fs::absolute(o.graph).string();
  if (!doc.contains("graph")) throw BadParams("a graph is required (--graph or config)");
  if (!o.model.empty()) doc["model"] = o.model;
  if (!o.policy.empty()) doc["policy"] = o.policy;
  if (!o.schedules.empty()) doc["schedules"] = fs::absolute(o.schedules).string();
  if (!o.trees.empty())
    doc["trees"] = (o.trees == "all" || o.trees == "star") ? o.trees : fs::absolute(o.trees).string();
  if (!o.function.empty()) doc["function"] = {{"name", o.function}, {"k", o.k}, {"alphabet_size", o.alphabet}};
  if (!o.lambdas.empty()) doc["lambdas"] = o.lambdas;
  if (!o.seeds.empty()) doc["seeds"] = o.seeds;
  if (o.horizon > 0.0) doc["horizon"] = o.horizon;
  if (o.sample_every > 0.0) doc["sample_every"] = o.sample_every;
  if (!o.arrivals.empty()) doc["arrivals"] = {{"law", o.arrivals}, {"batch", o.batch}};
  if (!o.rate_units.empty()) doc["rate_units"] = o.rate_units;
  if (!o.output_dir.empty()) doc["output_dir"] = fs::absolute(o.output_dir).string();
  if (o.threads > 0) doc["threads"] = o.threads;
  if (o.allow_cyclic) doc["allow_cyclic"] = true;
  if (o.check_invariants) doc["check_invariants"] = true;
  if (o.window > 0) doc["stability"]["window_samples"] = o.window;
  if (o.cap_factor > 0.0) doc["stability"]["cap_factor"] = o.cap_factor;
  return ExperimentConfig::from_json(doc, base_dir);
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw BadParams("cannot write " + path);
  out << text;
}

int run_analyze(const std::string& graph_path, const std::string& schedules_path,
                const std::string& trees_arg, const std::string& function, int k, int alphabet,
                const std::string& rate_units, const std::string& output) {
  NetworkGraph g = graph_from_json(read_json_file(graph_path));
  FmuxFunction f(parse_function_spec(function, k, alphabet));
  std::optional<ScheduleSet> sched;
  if (!schedules_path.empty()) sched = schedules_from_json(g, read_json_file(schedules_path));
  std::vector<AggregationTree> trees =
      trees_arg == "all" ? enumerate_aggregation_trees(g) : trees_from_json(g, read_json_file(trees_arg)).trees;
  Analysis a = analyze(g, sched ? &*sched : nullptr, trees, f, rate_units);
  emit(output, analysis_to_json(a).dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"In-network FMux computation workbench"};
  app.require_subcommand(1);

  auto* analyze = app.add_subcommand("analyze", "Min-mincut, tree packing and maximum refresh rate");
  std::string a_graph, a_sched, a_trees = "all", a_func = "parity", a_units = "packets", a_out;
  int a_k = 2, a_alpha = 16;
  analyze->add_option("--graph", a_graph, "Graph JSON file")->required();
  analyze->add_option("--schedules", a_sched, "Schedule set JSON file");
  analyze->add_option("--trees", a_trees, "all or a tree list JSON file");
  analyze->add_option("--function", a_func, "parity, max or kth");
  analyze->add_option("--k", a_k, "Order statistic for kth");
  analyze->add_option("--alphabet", a_alpha, "Alphabet size for max and kth");
  analyze->add_option("--rate-units", a_units, "packets or bits")->check(CLI::IsMember({"packets", "bits"}));
  analyze->add_option("-o,--output", a_out, "Output JSON (default stdout)");

  Overrides sim_o;
  auto* simulate = app.add_subcommand("simulate", "Run one simulation and write its time series");
  add_experiment_options(simulate, sim_o);
  double s_lambda = 0.0;
  std::uint64_t s_seed = 0;
  std::string s_out, s_summary;
  simulate->add_option("--lambda", s_lambda, "Refresh rate (rounds per time unit or slot)")->required();
  simulate->add_option("--seed", s_seed, "Random seed")->required();
  simulate->add_option("-o,--output", s_out, "CSV output (default stdout)");
  simulate->add_option("--summary", s_summary, "Summary JSON output");

  Overrides sw_o;
  auto* sweep_cmd = app.add_subcommand("sweep", "Lambda sweep with stability verdicts");
  add_experiment_options(sweep_cmd, sw_o);
  sweep_cmd->add_option("--lambdas", sw_o.lambdas, "Refresh rates")->delimiter(',');
  sweep_cmd->add_option("--seeds", sw_o.seeds, "Seeds")->delimiter(',');
  sweep_cmd->add_option("--output-dir", sw_o.output_dir, "Directory for CSV files and summary.json");
  sweep_cmd->add_option("--threads", sw_o.threads, "Parallel simulations");

  auto* verify_cmd = app.add_subcommand("verify", "Run the verification suites");
  std::string v_suite = "all", v_out;
  std::uint64_t v_seed = 1;
  verify_cmd->add_option("--suite", v_suite, "flows, fmux, wireline, wireless or all")
      ->check(CLI::IsMember({"flows", "fmux", "wireline", "wireless", "all"}));
  verify_cmd->add_option("--seed", v_seed, "Random seed");
  verify_cmd->add_option("-o,--output", v_out, "Report JSON (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze) return run_analyze(a_graph, a_sched, a_trees, a_func, a_k, a_alpha, a_units, a_out);

    if (*simulate) {
      std::string base;
      ExperimentConfig c = build_config(sim_o, base);
      c.lambdas = {s_lambda};
      c.seeds = {s_seed};
      c.validate();
      Experiment e = prepare_experiment(c, base);
      RunResult r = run_point(e, c, s_lambda, s_seed);
      emit(s_out, r.csv);
      if (!s_summary.empty()) {
        json j = run_summary(r);
        j["model"] = model_name(c.model);
        j["policy"] = c.policy;
        j["delta_star"] = e.delta_star;
        j["lambda_star"] = e.lambda_star;
        emit(s_summary, j.dump(2) + "\n");
      }
      return 0;
    }

    if (*sweep_cmd) {
      std::string base;
      ExperimentConfig c = build_config(sw_o, base);
      SweepResult r = sweep(c, base);
      std::cout << r.summary.dump(2) << '\n';
      return 0;
    }

    if (*verify_cmd) {
      json report = verify(v_suite, VerifyOptions{v_seed});
      emit(v_out, report.dump(2) + "\n");
      if (!report["passed"].get<bool>()) {
        std::cerr << "verify: one or more checks failed\n";
        return 1;
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
