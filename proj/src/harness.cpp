#include "fmuxnet/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "fmuxnet/errors.hpp"

namespace fmuxnet {

namespace fs = std::filesystem;

Model parse_model(const std::string& name) {
  if (name == "wireline") return Model::wireline;
  if (name == "wireless") return Model::wireless;
  throw BadParams("unknown model: " + name);
}

std::string model_name(Model m) { return m == Model::wireline ? "wireline" : "wireless"; }

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::stable: return "stable";
    case Verdict::unstable: return "unstable";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

StabilityVerdict detect_stability(std::span<const double> times, std::span<const double> totals,
                                  double lambda, int node_count, const StabilityParams& p) {
  if (times.size() != totals.size()) throw BadParams("time and queue series differ in length");
  if (p.window_samples == 0) throw BadParams("window must hold at least one sample");
  if (!(p.burn_in >= 0.0 && p.burn_in < 1.0)) throw BadParams("burn-in fraction must lie in [0, 1)");
  if (totals.size() < 10 * p.window_samples)
    throw SeriesTooShort("series of " + std::to_string(totals.size()) + " samples, need " +
                         std::to_string(10 * p.window_samples));

  StabilityVerdict v;
  v.eps_stable = p.stable_factor * lambda;
  v.eps_unstable = p.unstable_factor * lambda;
  v.queue_cap = p.cap_factor * lambda * node_count;

  const auto start = static_cast<std::size_t>(std::floor(p.burn_in * static_cast<double>(totals.size())));
  const std::size_t windows = (totals.size() - start) / p.window_samples;
  std::vector<double> wt(windows, 0.0);
  std::vector<double> wq(windows, 0.0);
  for (std::size_t w = 0; w < windows; ++w) {
    for (std::size_t k = 0; k < p.window_samples; ++k) {
      std::size_t i = start + w * p.window_samples + k;
      wt[w] += times[i];
      wq[w] += totals[i];
    }
    wt[w] /= static_cast<double>(p.window_samples);
    wq[w] /= static_cast<double>(p.window_samples);
  }
  double mt = 0.0;
  double mq = 0.0;
  for (std::size_t w = 0; w < windows; ++w) {
    mt += wt[w];
    mq += wq[w];
  }
  mt /= static_cast<double>(windows);
  mq /= static_cast<double>(windows);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t w = 0; w < windows; ++w) {
    sxy += (wt[w] - mt) * (wq[w] - mq);
    sxx += (wt[w] - mt) * (wt[w] - mt);
  }
  v.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  for (std::size_t i = start; i < totals.size(); ++i) v.max_queue = std::max(v.max_queue, totals[i]);

  if (v.slope <= v.eps_stable && v.max_queue <= v.queue_cap)
    v.verdict = Verdict::stable;
  else if (v.slope >= v.eps_unstable)
    v.verdict = Verdict::unstable;
  else
    v.verdict = Verdict::inconclusive;
  return v;
}

namespace {

std::string resolve_path(const std::string& path, const std::string& base_dir) {
  if (base_dir.empty() || fs::path(path).is_absolute()) return path;
  // Absolute, so resolving an already-resolved config again is a no-op.
  return fs::absolute(fs::path(base_dir) / path).lexically_normal().string();
}

json load_maybe_file(const json& v, const std::string& base_dir) {
  if (v.is_string()) return read_json_file(resolve_path(v.get<std::string>(), base_dir));
  return v;
}

std::vector<double> parse_lambdas(const json& v) {
  if (v.is_number()) return {v.get<double>()};
  if (v.is_array()) return v.get<std::vector<double>>();
  if (v.is_object()) {
    const double start = v.at("start").get<double>();
    const double stop = v.at("stop").get<double>();
    const double step = v.at("step").get<double>();
    if (!(step > 0.0)) throw BadParams("lambda step must be positive");
    std::vector<double> out;
    const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(start + static_cast<double>(i) * step);
    return out;
  }
  throw BadParams("\"lambdas\" must be a number, list or {start, stop, step}");
}

AggregationTree star_tree(const NetworkGraph& g) {
  std::vector<NodeId> parent(static_cast<std::size_t>(g.node_count()), g.aggregator());
  parent[static_cast<std::size_t>(g.aggregator())] = -1;
  return AggregationTree(g, std::move(parent));
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& doc, const std::string& base_dir) {
  ExperimentConfig c;
  try {
    if (!doc.contains("graph")) throw BadParams("config needs \"graph\"");
    c.graph = doc.at("graph");
    if (c.graph.is_string()) c.graph = resolve_path(c.graph.get<std::string>(), base_dir);
    c.model = parse_model(doc.value("model", std::string("wireline")));
    c.policy = doc.value("policy", std::string(c.model == Model::wireline ? "random-useful"
                                                                         : "greedy-maxweight"));
    if (doc.contains("function")) c.function = function_from_json(doc.at("function"));
    if (doc.contains("lambdas")) c.lambdas = parse_lambdas(doc.at("lambdas"));
    if (doc.contains("lambda")) c.lambdas = parse_lambdas(doc.at("lambda"));
    if (doc.contains("seeds")) c.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    if (doc.contains("seed")) c.seeds = {doc.at("seed").get<std::uint64_t>()};
    c.horizon = doc.value("horizon", c.horizon);
    c.sample_every = doc.value("sample_every", c.sample_every);
    if (doc.contains("stability")) {
      const json& s = doc.at("stability");
      c.stability.window_samples = s.value("window_samples", c.stability.window_samples);
      c.stability.burn_in = s.value("burn_in", c.stability.burn_in);
      c.stability.stable_factor = s.value("stable_factor", c.stability.stable_factor);
      c.stability.unstable_factor = s.value("unstable_factor", c.stability.unstable_factor);
      c.stability.cap_factor = s.value("cap_factor", c.stability.cap_factor);
    }
    if (doc.contains("schedules")) {
      c.schedules = doc.at("schedules");
      if (c.schedules.is_string()) c.schedules = resolve_path(c.schedules.get<std::string>(), base_dir);
    }
    if (doc.contains("trees")) {
      c.trees = doc.at("trees");
      if (c.trees.is_string() && c.trees != "all" && c.trees != "star")
        c.trees = resolve_path(c.trees.get<std::string>(), base_dir);
    }
    c.rate_units = doc.value("rate_units", c.rate_units);
    if (doc.contains("arrivals")) {
      const json& a = doc.at("arrivals");
      c.arrivals.law = parse_arrival_law(a.value("law", std::string("poisson")));
      c.arrivals.batch = a.value("batch", 1);
    }
    c.allow_cyclic = doc.value("allow_cyclic", false);
    c.check_invariants = doc.value("check_invariants", false);
    c.output_dir = doc.value("output_dir", std::string());
    if (!c.output_dir.empty()) c.output_dir = resolve_path(c.output_dir, base_dir);
    c.threads = doc.value("threads", 1u);
  } catch (const json::exception& e) {
    throw BadParams(std::string("config: ") + e.what());
  }
  return c;
}

json ExperimentConfig::to_json() const {
  json arrivals_doc = {{"law", arrivals.law == ArrivalLaw::poisson           ? "poisson"
                               : arrivals.law == ArrivalLaw::bernoulli_batch ? "bernoulli_batch"
                                                                             : "deterministic"},
                       {"batch", arrivals.batch}};
  return {{"graph", graph},
          {"model", model_name(model)},
          {"policy", policy},
          {"function", function_to_json(function)},
          {"lambdas", lambdas},
          {"seeds", seeds},
          {"horizon", horizon},
          {"sample_every", sample_every},
          {"stability",
           {{"window_samples", stability.window_samples},
            {"burn_in", stability.burn_in},
            {"stable_factor", stability.stable_factor},
            {"unstable_factor", stability.unstable_factor},
            {"cap_factor", stability.cap_factor}}},
          {"schedules", schedules},
          {"trees", trees},
          {"rate_units", rate_units},
          {"arrivals", arrivals_doc},
          {"allow_cyclic", allow_cyclic},
          {"check_invariants", check_invariants},
          {"output_dir", output_dir},
          {"threads", threads}};
}

void ExperimentConfig::validate() const {
  if (lambdas.empty()) throw BadParams("no lambda values");
  if (seeds.empty()) throw BadParams("no seeds");
  for (double l : lambdas)
    if (!(l >= 0.0) || !std::isfinite(l)) throw BadParams("lambda values must be nonnegative");
  if (!(sample_every > 0.0)) throw BadParams("sample interval must be positive");
  if (model == Model::wireless && sample_every != std::floor(sample_every))
    throw BadParams("wireless sample interval must be a whole number of slots");
  const double window = static_cast<double>(stability.window_samples) * sample_every;
  if (horizon < 10.0 * window)
    throw BadParams("horizon must be at least 10 detector windows (" + format_number(10.0 * window) + ")");
  if (rate_units != "packets" && rate_units != "bits")
    throw BadParams("rate_units must be packets or bits");
}

NetworkGraph resolve_graph(const json& source, const std::string& base_dir) {
  json doc = load_maybe_file(source, base_dir);
  if (doc.is_object() && doc.contains("generate")) {
    const json& gdoc = doc.at("generate");
    GenerateParams p;
    p.nodes = gdoc.at("nodes").get<int>();
    p.capacity = gdoc.value("capacity", 1.0);
    p.seed = gdoc.value("seed", std::uint64_t{0});
    p.edge_probability = gdoc.value("edge_probability", 0.5);
    p.min_capacity = gdoc.value("min_capacity", 0);
    p.max_capacity = gdoc.value("max_capacity", 0);
    return generate(parse_graph_kind(gdoc.at("kind").get<std::string>()), p);
  }
  return graph_from_json(doc);
}

Experiment prepare_experiment(const ExperimentConfig& config, const std::string& base_dir) {
  NetworkGraph g = resolve_graph(config.graph, base_dir);
  FmuxFunction f(config.function);
  Experiment e{g, f, ScheduleSet{}, {}, PolicyConfig{}, 0.0, 0.0, 0};

  if (config.model == Model::wireline) {
    if (config.policy != "random-useful")
      throw BadParams("wireline policy must be random-useful, got " + config.policy);
    if (!config.allow_cyclic) topological_order(g);
    e.delta_star = min_mincut(g, g.capacities()).value;
    e.lambda_star = e.delta_star;
    return e;
  }

  if (config.schedules.is_null())
    e.schedules = ScheduleSet::wireline(g);
  else
    e.schedules = schedules_from_json(g, load_maybe_file(config.schedules, base_dir));
  if (config.rate_units == "bits") e.floored_rates = floor_packet_schedules(e.schedules, f.bits_per_packet());

  WeightedTrees wt;
  if (config.trees == "all") {
    wt.trees = enumerate_aggregation_trees(g);
  } else if (config.trees == "star") {
    wt.trees.push_back(star_tree(g));
  } else {
    wt = trees_from_json(g, load_maybe_file(config.trees, base_dir));
  }
  if (wt.trees.empty()) throw BadParams("empty tree set");

  const std::string& p = config.policy;
  if (p == "greedy-maxweight") {
    e.policy.routing = RoutingPolicy::greedy_tree_loading;
    e.trees = std::move(wt.trees);
  } else if (p == "single-tree") {
    e.policy.routing = RoutingPolicy::single_tree;
    if (wt.trees.size() != 1)
      throw MultiTreeConfig("single-tree policy needs exactly one tree, got " +
                            std::to_string(wt.trees.size()));
    e.trees = std::move(wt.trees);
  } else if (p == "fixed-split") {
    e.policy.routing = RoutingPolicy::fixed_split;
    e.policy.split_weights =
        wt.weights.empty() ? std::vector<double>(wt.trees.size(), 1.0) : wt.weights;
    e.trees = std::move(wt.trees);
  } else if (p == "static-sss") {
    StaticSssPlan plan = static_sss_policy(g, e.schedules, wt.trees);
    e.policy = plan.policy;
    e.trees = std::move(plan.trees);
  } else {
    throw BadParams("unknown wireless policy: " + p);
  }
  e.delta_star = optimal_sss(g, e.schedules).delta_star;
  e.lambda_star = e.delta_star;
  return e;
}

std::string run_file_stem(const ExperimentConfig& config, double lambda, std::uint64_t seed) {
  return model_name(config.model) + "_" + config.policy + "_lam" + format_number(lambda) + "_seed" +
         std::to_string(seed);
}

RunResult run_point(const Experiment& e, const ExperimentConfig& config, double lambda,
                    std::uint64_t seed) {
  RunResult r;
  r.lambda = lambda;
  r.seed = seed;
  std::ostringstream csv;
  std::vector<double> times;
  std::vector<double> totals;
  if (config.model == Model::wireline) {
    WirelineOptions o;
    o.lambda = lambda;
    o.seed = seed;
    o.horizon = config.horizon;
    o.sample_every = config.sample_every;
    o.allow_cyclic = config.allow_cyclic;
    o.check_invariants = config.check_invariants;
    WirelineSimulator sim(e.graph, e.function, o);
    TraceMetrics m = sim.run();
    write_wireline_csv(csv, m);
    for (const auto& s : m.samples) {
      times.push_back(s.time);
      totals.push_back(static_cast<double>(s.in_flight));
    }
    r.arrivals = m.arrivals;
    r.completed = m.completed;
    r.oracle_checks = m.oracle_checks;
    r.mean_latency = m.mean_latency;
  } else {
    WirelessOptions o;
    o.arrivals = config.arrivals;
    o.arrivals.mean = lambda;
    o.seed = seed;
    o.horizon = static_cast<std::uint64_t>(config.horizon);
    o.sample_every = static_cast<std::uint64_t>(config.sample_every);
    o.check_invariants = config.check_invariants;
    WirelessSimulator sim(e.graph, e.schedules, e.trees, e.function, e.policy, o);
    WirelessMetrics m = sim.run();
    write_wireless_csv(csv, m, e.trees.size());
    for (const auto& s : m.samples) {
      times.push_back(static_cast<double>(s.slot));
      totals.push_back(static_cast<double>(s.in_flight));
    }
    r.arrivals = m.arrivals;
    r.completed = m.completed;
    r.oracle_checks = m.oracle_checks;
    r.mean_latency = m.mean_latency;
  }
  r.stability = detect_stability(times, totals, lambda, e.graph.node_count(), config.stability);
  r.csv = csv.str();
  return r;
}

json run_summary(const RunResult& r) {
  json j = {{"lambda", r.lambda},
            {"seed", r.seed},
            {"verdict", verdict_name(r.stability.verdict)},
            {"slope", r.stability.slope},
            {"max_queue", r.stability.max_queue},
            {"eps_stable", r.stability.eps_stable},
            {"eps_unstable", r.stability.eps_unstable},
            {"queue_cap", r.stability.queue_cap},
            {"arrivals", r.arrivals},
            {"completed", r.completed},
            {"oracle_checks", r.oracle_checks},
            {"mean_latency", r.mean_latency}};
  if (!r.csv_path.empty()) j["csv"] = r.csv_path;
  return j;
}

void summarize_sweep(SweepResult& result, std::size_t seed_count) {
  std::map<double, LambdaSummary> by_lambda;
  for (const auto& p : result.points) {
    auto& s = by_lambda[p.lambda];
    s.lambda = p.lambda;
    switch (p.stability.verdict) {
      case Verdict::stable: ++s.stable; break;
      case Verdict::unstable: ++s.unstable; break;
      case Verdict::inconclusive: ++s.inconclusive; break;
    }
  }
  result.per_lambda.clear();
  for (auto& [l, s] : by_lambda) {
    const std::size_t n = s.stable + s.unstable + s.inconclusive;
    s.verdict = s.stable == n ? Verdict::stable
                : s.unstable == n ? Verdict::unstable
                                  : Verdict::inconclusive;
    result.per_lambda.push_back(s);
  }
  // The stable region must be a prefix of the grid; later stable points are flagged.
  result.monotone = true;
  result.lambda_hat.reset();
  bool prefix = true;
  for (auto& s : result.per_lambda) {
    if (s.verdict == Verdict::stable && prefix) {
      result.lambda_hat = s.lambda;
    } else if (s.verdict == Verdict::stable) {
      result.monotone = false;
      s.verdict = Verdict::inconclusive;
    } else {
      prefix = false;
    }
  }
  result.definitive = seed_count >= 3;
}

SweepResult sweep(const ExperimentConfig& config, const std::string& base_dir) {
  config.validate();
  const Experiment e = prepare_experiment(config, base_dir);

  std::vector<double> lambdas = config.lambdas;
  std::sort(lambdas.begin(), lambdas.end());
  lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
  std::vector<std::pair<double, std::uint64_t>> grid;
  for (double l : lambdas)
    for (std::uint64_t s : config.seeds) grid.emplace_back(l, s);

  SweepResult result;
  result.points.resize(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        result.points[i] = run_point(e, config, grid[i].first, grid[i].second);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(grid.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);

  if (!config.output_dir.empty()) {
    fs::create_directories(config.output_dir);
    for (auto& p : result.points) {
      fs::path path = fs::path(config.output_dir) / (run_file_stem(config, p.lambda, p.seed) + ".csv");
      std::ofstream out(path, std::ios::binary);
      if (!out) throw BadParams("cannot write " + path.string());
      out << p.csv;
      p.csv_path = path.string();
    }
  }

  summarize_sweep(result, config.seeds.size());
  result.delta_star = e.delta_star;
  result.lambda_star = e.lambda_star;

  json points = json::array();
  for (const auto& p : result.points) points.push_back(run_summary(p));
  json per = json::array();
  for (const auto& s : result.per_lambda)
    per.push_back({{"lambda", s.lambda},
                   {"verdict", verdict_name(s.verdict)},
                   {"stable", s.stable},
                   {"unstable", s.unstable},
                   {"inconclusive", s.inconclusive}});
  result.summary = {{"model", model_name(config.model)},
                    {"policy", config.policy},
                    {"function", function_to_json(config.function)},
                    {"delta_star", e.delta_star},
                    {"lambda_star", e.lambda_star},
                    {"lambda_hat", result.lambda_hat ? json(*result.lambda_hat) : json(nullptr)},
                    {"monotone", result.monotone},
                    {"definitive", result.definitive},
                    {"horizon", config.horizon},
                    {"per_lambda", per},
                    {"points", points}};
  if (e.floored_rates > 0) result.summary["floored_rates"] = e.floored_rates;
  if (!config.output_dir.empty())
    write_json_file((fs::path(config.output_dir) / "summary.json").string(), result.summary);
  return result;
}

}  // namespace fmuxnet
