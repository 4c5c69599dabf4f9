// Acceptance run: one line per criterion, with the measured numbers.
#include <boost/math/distributions/chi_squared.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <unistd.h>

#include <CLI11.hpp>

#include "fmuxnet/errors.hpp"
#include "fmuxnet/harness.hpp"

using namespace fmuxnet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct FunctionTally {
  std::uint64_t completed = 0;
  std::uint64_t mismatches = 0;
};
std::map<std::string, FunctionTally> g_tally;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

NetworkGraph triangle() { return NetworkGraph::build(3, 0, {{1, 0}, {2, 0}, {2, 1}}, {1, 1, 1}); }

NetworkGraph k5() {
  GenerateParams p;
  p.nodes = 5;
  return generate(GraphKind::complete, p);
}

ScheduleSet shared_channel(const NetworkGraph& g) {
  ScheduleSet s;
  for (LinkIndex l = 0; l < g.link_count(); ++l) s.schedules.push_back({{l}, {1.0}});
  return s;
}

const json kTriangleDoc = {{"nodes", 3},
                           {"aggregator", 0},
                           {"links",
                            {{{"from", 1}, {"to", 0}, {"capacity", 1}},
                             {{"from", 2}, {"to", 0}, {"capacity", 1}},
                             {{"from", 2}, {"to", 1}, {"capacity", 1}}}}};
const json kSharedDoc = {{"schedules",
                          {{{"links", {{1, 0}}}, {"rates", {1}}},
                           {{"links", {{2, 0}}}, {"rates", {1}}},
                           {{"links", {{2, 1}}}, {"rates", {1}}}}}};
const json kK5Doc = {{"generate", {{"kind", "complete"}, {"nodes", 5}}}};

// Runs a sweep and records completed rounds per function for the oracle tally.
SweepResult tallied_sweep(const ExperimentConfig& c) {
  const std::string fname = function_name(c.function.kind);
  try {
    SweepResult r = sweep(c);
    for (const auto& p : r.points) g_tally[fname].completed += p.oracle_checks;
    return r;
  } catch (const OracleMismatch&) {
    ++g_tally[fname].mismatches;
    throw;
  }
}

std::string verdict_list(const SweepResult& r, double lambda) {
  std::string s;
  for (const auto& p : r.points) {
    if (p.lambda != lambda) continue;
    if (!s.empty()) s += ",";
    s += verdict_name(p.stability.verdict);
  }
  return s;
}

bool all_points(const SweepResult& r, double lambda, Verdict v) {
  bool any = false;
  for (const auto& p : r.points) {
    if (p.lambda != lambda) continue;
    any = true;
    if (p.stability.verdict != v) return false;
  }
  return any;
}

std::string point_stats(const SweepResult& r, double lambda) {
  double max_slope = -1e300;
  double max_q = 0.0;
  double cap = 0.0;
  for (const auto& p : r.points) {
    if (p.lambda != lambda) continue;
    max_slope = std::max(max_slope, p.stability.slope);
    max_q = std::max(max_q, p.stability.max_queue);
    cap = p.stability.queue_cap;
  }
  return "max slope " + fmt(max_slope) + ", max queue " + fmt(max_q, 6) + " (cap " + fmt(cap) + ")";
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  auto t0 = Clock::now();
  Rng rng(20240601);
  int built = 0;
  int bad = 0;
  double worst = 0.0;
  std::size_t max_trees = 0;
  while (built < 50) {
    const int n = 2 + static_cast<int>(rng.index(6));
    std::vector<Link> links;
    std::vector<double> caps;
    for (int u = 0; u < n; ++u)
      for (int v = 0; v < n; ++v)
        if (u != v && rng.bernoulli(0.45)) {
          links.push_back({u, v});
          caps.push_back(static_cast<double>(1 + rng.index(4)));
        }
    try {
      NetworkGraph g = NetworkGraph::build(n, 0, links, caps);
      ++built;
      auto trees = enumerate_aggregation_trees(g);
      max_trees = std::max(max_trees, trees.size());
      TreePacking p = tree_packing_lp(g, g.capacities(), trees);
      const double delta = min_mincut(g, g.capacities()).value;
      worst = std::max(worst, std::abs(p.total - delta));
      if (std::abs(p.total - delta) > 1e-6) ++bad;
    } catch (const GraphError&) {
      // unreachable or empty draw; resample
    }
  }
  const double dt = seconds_since(t0);
  return {bad == 0 && dt < 30.0, "50 random digraphs, " + std::to_string(bad) + " mismatches, max |packing - delta*| = " +
                                     fmt(worst) + ", up to " + std::to_string(max_trees) + " trees, " + fmt(dt, 3) + " s"};
}

Outcome criterion2() {
  auto t0 = Clock::now();
  NetworkGraph g = k5();
  const double delta = min_mincut(g, g.capacities()).value;
  TreePacking p = tree_packing_lp(g, g.capacities(), enumerate_aggregation_trees(g));
  std::vector<AggregationTree> depth2;
  for (NodeId i = 1; i < 5; ++i) {
    std::vector<NodeId> parent(5, i);
    parent[0] = -1;
    parent[static_cast<std::size_t>(i)] = 0;
    depth2.emplace_back(g, parent);
  }
  const std::vector<double> ones(4, 1.0);
  const double slack = packing_min_slack(g, g.capacities(), depth2, ones);
  const double dt = seconds_since(t0);
  const bool ok = delta == 4.0 && std::abs(p.total - 4.0) <= 1e-9 && slack >= -1e-9 && dt < 1.0;
  return {ok, "delta* = " + fmt(delta, 17) + ", LP packing total = " + fmt(p.total, 12) +
                  ", four depth-2 trees at weight 1: min slack " + fmt(slack) + ", " + fmt(dt, 3) + " s"};
}

Outcome criterion3() {
  auto t0 = Clock::now();
  ExperimentConfig c;
  c.graph = kK5Doc;
  c.model = Model::wireline;
  c.policy = "random-useful";
  c.function = parse_function_spec("parity");
  c.lambdas = {3.6, 4.4};
  c.seeds = {1, 2, 3};
  c.horizon = 2e5;
  c.sample_every = 10;
  c.allow_cyclic = true;
  SweepResult r = tallied_sweep(c);
  const double dt = seconds_since(t0);
  const bool ok = all_points(r, 3.6, Verdict::stable) && all_points(r, 4.4, Verdict::unstable) && dt < 300;
  return {ok, "lambda* = " + fmt(r.lambda_star) + "; 3.6 -> [" + verdict_list(r, 3.6) + "] " + point_stats(r, 3.6) +
                  "; 4.4 -> [" + verdict_list(r, 4.4) + "] " + point_stats(r, 4.4) + "; " + fmt(dt, 3) + " s"};
}

double grid_search_shared_channel() {
  NetworkGraph g = triangle();
  double best = 0.0;
  const int steps = 100;
  for (int a = 0; a <= steps; ++a)
    for (int b = 0; a + b <= steps; ++b) {
      std::vector<double> rates = {a / double(steps), b / double(steps), (steps - a - b) / double(steps)};
      best = std::max(best, min_mincut(g, rates).value);
    }
  return best;
}

Outcome criterion4() {
  auto t0 = Clock::now();
  NetworkGraph g = triangle();
  const double lp = optimal_sss(g, shared_channel(g)).delta_star;
  const double grid = grid_search_shared_channel();
  ExperimentConfig c;
  c.graph = kTriangleDoc;
  c.schedules = kSharedDoc;
  c.model = Model::wireless;
  c.policy = "greedy-maxweight";
  c.function = parse_function_spec("max", 2, 16);
  c.lambdas = {0.45, 0.55};
  c.seeds = {1, 2, 3};
  c.horizon = 2e5;
  c.sample_every = 10;
  SweepResult r = tallied_sweep(c);
  const double dt = seconds_since(t0);
  const bool ok = std::abs(lp - 0.5) <= 1e-9 && std::abs(grid - 0.5) <= 1e-9 &&
                  all_points(r, 0.45, Verdict::stable) && all_points(r, 0.55, Verdict::unstable) && dt < 300;
  return {ok, "lambda* LP = " + fmt(lp, 12) + ", grid search = " + fmt(grid, 12) + "; 0.45 -> [" +
                  verdict_list(r, 0.45) + "] " + point_stats(r, 0.45) + "; 0.55 -> [" + verdict_list(r, 0.55) + "] " +
                  point_stats(r, 0.55) + "; " + fmt(dt, 3) + " s"};
}

Outcome criterion5() {
  NetworkGraph g = triangle();
  ExperimentConfig c;
  c.graph = kTriangleDoc;
  c.schedules = kSharedDoc;
  c.model = Model::wireless;
  c.policy = "static-sss";
  c.function = parse_function_spec("kth", 2, 16);
  c.lambdas = {0.45};
  c.seeds = {1, 2, 3};
  c.horizon = 2e5;
  c.sample_every = 10;
  SweepResult r = tallied_sweep(c);

  StaticSssPlan plan = static_sss_policy(g, shared_channel(g));
  WirelessOptions o;
  o.arrivals.mean = 0.45;
  o.seed = 11;
  o.horizon = 100000;
  o.sample_every = 1000;
  WirelessSimulator sim(g, shared_channel(g), plan.trees, FmuxFunction(c.function), plan.policy, o);
  WirelessMetrics m = sim.run();
  g_tally["kth"].completed += m.oracle_checks;
  double chi2 = 0.0;
  int categories = 0;
  bool zero_ok = true;
  std::string freq;
  for (std::size_t s = 0; s < m.schedule_counts.size(); ++s) {
    const double expected = plan.split.weights[s] * static_cast<double>(o.horizon);
    const double observed = static_cast<double>(m.schedule_counts[s]);
    freq += (freq.empty() ? "" : ",") + fmt(observed / static_cast<double>(o.horizon));
    if (expected <= 0.0) {
      zero_ok = zero_ok && observed == 0.0;
      continue;
    }
    ++categories;
    chi2 += (observed - expected) * (observed - expected) / expected;
  }
  double pvalue = 1.0;
  if (categories > 1) {
    boost::math::chi_squared dist(categories - 1);
    pvalue = boost::math::cdf(boost::math::complement(dist, chi2));
  }
  std::string pis;
  for (double w : plan.split.weights) pis += (pis.empty() ? "" : ",") + fmt(w);
  const bool ok = all_points(r, 0.45, Verdict::stable) && zero_ok && pvalue > 0.01;
  return {ok, "0.45 -> [" + verdict_list(r, 0.45) + "] " + point_stats(r, 0.45) + "; pi* = (" + pis +
                  "), observed (" + freq + "), chi2 = " + fmt(chi2) + ", p = " + fmt(pvalue)};
}

Outcome criterion6() {
  auto t0 = Clock::now();
  ExperimentConfig single;
  single.graph = kK5Doc;
  single.model = Model::wireless;
  single.policy = "single-tree";
  single.trees = "star";
  single.function = parse_function_spec("kth", 2, 16);
  single.lambdas = {0.5, 0.7, 0.9, 1.1, 1.3, 1.5};
  single.seeds = {1, 2, 3};
  single.horizon = 2e5;
  single.sample_every = 10;
  SweepResult rs = tallied_sweep(single);

  ExperimentConfig greedy = single;
  greedy.policy = "greedy-maxweight";
  greedy.trees = "all";
  greedy.lambdas = {3.2, 3.6, 4.0, 4.4};
  SweepResult rg = tallied_sweep(greedy);
  const double dt = seconds_since(t0);

  const double ls = rs.lambda_hat.value_or(0.0);
  const double lg = rg.lambda_hat.value_or(0.0);
  const double ratio = ls > 0.0 ? lg / ls : std::numeric_limits<double>::infinity();
  const bool ok = rs.lambda_hat && rg.lambda_hat && ls <= 1.1 && lg >= 3.6 && ratio >= 3.2;
  std::string sv;
  for (const auto& s : rs.per_lambda) sv += (sv.empty() ? "" : " ") + fmt(s.lambda) + ":" + verdict_name(s.verdict);
  std::string gv;
  for (const auto& s : rg.per_lambda) gv += (gv.empty() ? "" : " ") + fmt(s.lambda) + ":" + verdict_name(s.verdict);
  return {ok, "single-tree lambda_hat = " + fmt(ls) + " [" + sv + "]; greedy lambda_hat = " + fmt(lg) + " [" + gv +
                  "]; ratio " + fmt(ratio) + "; " + fmt(dt, 3) + " s"};
}

Outcome criterion7() {
  bool ok = true;
  std::string d;
  for (const char* f : {"parity", "max", "kth"}) {
    const auto& t = g_tally[f];
    ok = ok && t.completed >= 10000 && t.mismatches == 0;
    d += std::string(d.empty() ? "" : "; ") + f + ": " + std::to_string(t.completed) + " oracle-checked rounds, " +
         std::to_string(t.mismatches) + " mismatches";
  }
  return {ok, d};
}

Outcome criterion8() {
  std::string d;
  bool ok = true;
  auto invariant_run = [&](const std::string& name, const NetworkGraph& g, double lambda, double horizon, bool cyc) {
    WirelineOptions o;
    o.lambda = lambda;
    o.seed = 5;
    o.horizon = horizon;
    o.sample_every = horizon / 10;
    o.allow_cyclic = cyc;
    o.check_invariants = true;
    WirelineSimulator sim(g, FmuxFunction(parse_function_spec("parity")), o);
    TraceMetrics m = sim.run();
    g_tally["parity"].completed += m.oracle_checks;
    ok = ok && m.events >= 10000 && m.invariant_checks == m.events;
    d += name + ": " + std::to_string(m.events) + " events checked; ";
  };
  invariant_run("triangle", triangle(), 0.8, 5000, false);
  invariant_run("K5", k5(), 3.0, 2000, true);

  Rng rng(77);
  for (const auto& [name, g] : std::vector<std::pair<std::string, NetworkGraph>>{{"triangle", triangle()}, {"K5", k5()}}) {
    const std::size_t sets = valid_footprint_sets(g).size();
    for (double alpha : {0.1, 1.0, 10.0}) {
      int violations = 0;
      for (int t = 0; t < 10000; ++t) {
        std::vector<double> x(sets);
        for (auto& v : x) v = rng.bernoulli(0.3) ? 0.0 : rng.uniform01();
        if (!verify_counting_lemma(g, x, alpha).holds) ++violations;
      }
      ok = ok && violations == 0;
      d += "counting lemma " + name + " alpha=" + fmt(alpha) + ": " + std::to_string(violations) + "/10000 violated; ";
    }
  }
  return {ok, d};
}

Outcome criterion9() {
  std::uint64_t rounds = 0;
  std::uint64_t transmissions = 0;
  auto run = [&](const NetworkGraph& g, const ScheduleSet& s, std::vector<AggregationTree> trees, PolicyConfig p,
                 double lambda, std::uint64_t horizon) {
    WirelessOptions o;
    o.arrivals.mean = lambda;
    o.seed = 9;
    o.horizon = horizon;
    o.sample_every = horizon / 10;
    o.check_invariants = true;
    WirelessSimulator sim(g, s, std::move(trees), FmuxFunction(parse_function_spec("max", 2, 16)), p, o);
    WirelessMetrics m = sim.run();
    g_tally["max"].completed += m.oracle_checks;
    rounds += m.conservation_checks;
    transmissions += m.type_at_checks;
  };
  NetworkGraph tri = triangle();
  run(tri, shared_channel(tri), enumerate_aggregation_trees(tri), PolicyConfig{}, 0.45, 25000);
  NetworkGraph g5 = k5();
  run(g5, ScheduleSet::wireline(g5), enumerate_aggregation_trees(g5), PolicyConfig{}, 3.0, 3500);
  return {rounds >= 10000, std::to_string(rounds) + " rounds conservation-checked, " + std::to_string(transmissions) +
                               " transmissions Type-AT-checked"};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome criterion10() {
  const fs::path dir = fs::temp_directory_path() / ("fmuxnet_determinism_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  ExperimentConfig c;
  c.graph = kTriangleDoc;
  c.model = Model::wireline;
  c.policy = "random-useful";
  c.lambdas = {0.5, 0.8};
  c.seeds = {3, 4};
  c.horizon = 5000;
  c.sample_every = 5;
  c.output_dir = (dir / "a").string();
  c.threads = 1;
  sweep(c);
  c.output_dir = (dir / "b").string();
  c.threads = 3;
  sweep(c);

  ExperimentConfig w;
  w.graph = kK5Doc;
  w.model = Model::wireless;
  w.policy = "greedy-maxweight";
  w.function = parse_function_spec("kth", 2, 16);
  w.lambdas = {2.0, 3.0};
  w.seeds = {3};
  w.horizon = 5000;
  w.sample_every = 5;
  w.output_dir = (dir / "a").string();
  sweep(w);
  w.output_dir = (dir / "b").string();
  w.threads = 2;
  sweep(w);

  int files = 0;
  int differ = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    if (e.path().extension() != ".csv") continue;
    ++files;
    if (read_file(e.path()) != read_file(dir / "b" / e.path().filename())) ++differ;
  }
  fs::remove_all(dir);
  return {files == 6 && differ == 0,
          std::to_string(files) + " CSV files compared across repeated runs, " + std::to_string(differ) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::vector<int> known_red;
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--known-red", known_red, "Criteria with a documented deviation")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"Edmonds equality on random digraphs", criterion1},
      {"complete graph K5 fixture", criterion2},
      {"wireline stability bracket on K5", criterion3},
      {"wireless greedy MaxWeight on shared channel", criterion4},
      {"static randomized policy", criterion5},
      {"single-tree gap on K5", criterion6},
      {"aggregation oracle", criterion7},
      {"footprint invariants and counting lemma", criterion8},
      {"Type-AT and per-tree flow conservation", criterion9},
      {"determinism", criterion10},
  };
  const std::set<int> red(known_red.begin(), known_red.end());
  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::string tag = o.pass ? "PASS" : "FAIL";
    if (!o.pass && red.count(id)) tag = "FAIL (known deviation)";
    std::cout << "criterion " << id << " [" << criteria[i].first << "]: " << tag << " - " << o.detail << std::endl;
    if (!o.pass && !red.count(id)) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
