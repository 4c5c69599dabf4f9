#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "fmuxnet/errors.hpp"
#include "fmuxnet/harness.hpp"

namespace fmuxnet {

namespace {

struct Check {
  explicit Check(std::string n, bool ok = false, json d = {})
      : name(std::move(n)), passed(ok), detail(std::move(d)) {}
  std::string name;
  bool passed;
  json detail;
};

using CheckFn = std::function<Check()>;

// Minimum s-t cut by enumerating every node subset containing s but not t.
double enumerated_min_cut(const NetworkGraph& g, NodeId s, NodeId t) {
  const int n = g.node_count();
  double best = std::numeric_limits<double>::infinity();
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    if (!(mask >> s & 1) || (mask >> t & 1)) continue;
    double cut = 0.0;
    for (LinkIndex l = 0; l < g.link_count(); ++l)
      if ((mask >> g.link(l).from & 1) && !(mask >> g.link(l).to & 1)) cut += g.capacity(l);
    best = std::min(best, cut);
  }
  return best;
}

NetworkGraph random_test_dag(Rng& rng, std::uint64_t seed) {
  GenerateParams p;
  p.nodes = 2 + static_cast<int>(rng.index(6));
  p.seed = seed;
  p.edge_probability = 0.5;
  p.min_capacity = 1;
  p.max_capacity = 4;
  return generate(GraphKind::random_dag, p);
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

std::vector<Check> flows_checks(std::uint64_t seed) {
  std::vector<CheckFn> fns;
  fns.push_back([seed] {
    Check c{"edmonds_equality_random_dags"};
    Rng rng(seed);
    int bad = 0;
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      NetworkGraph g = random_test_dag(rng, seed * 1000 + static_cast<std::uint64_t>(i));
      const double delta = min_mincut(g, g.capacities()).value;
      TreePacking p = tree_packing_lp(g, g.capacities(), enumerate_aggregation_trees(g));
      const double gap = std::abs(p.total - delta);
      const double slack = packing_min_slack(g, g.capacities(), p.trees, p.weights);
      worst = std::max(worst, gap);
      if (gap > 1e-6 || slack < -1e-9) ++bad;
    }
    c.passed = bad == 0;
    c.detail = {{"graphs", 50}, {"failures", bad}, {"max_gap", worst}};
    return c;
  });
  fns.push_back([seed] {
    Check c{"max_flow_matches_cut_enumeration"};
    Rng rng(seed + 1);
    int bad = 0;
    int pairs = 0;
    for (int i = 0; i < 50; ++i) {
      NetworkGraph g = random_test_dag(rng, seed * 2000 + static_cast<std::uint64_t>(i));
      for (NodeId s : g.sensors()) {
        ++pairs;
        double f = max_flow(g, g.capacities(), s, g.aggregator()).value;
        if (std::abs(f - enumerated_min_cut(g, s, g.aggregator())) > 1e-9) ++bad;
      }
    }
    c.passed = bad == 0;
    c.detail = {{"pairs", pairs}, {"failures", bad}};
    return c;
  });
  fns.push_back([] {
    Check c{"complete_graph_k5"};
    NetworkGraph g = k5();
    const double delta = min_mincut(g, g.capacities()).value;
    TreePacking p = tree_packing_lp(g, g.capacities(), enumerate_aggregation_trees(g));
    c.passed = delta == 4.0 && std::abs(p.total - 4.0) <= 1e-9;
    c.detail = {{"delta_star", delta}, {"packing_total", p.total}};
    return c;
  });
  fns.push_back([] {
    Check c{"optimal_split_shared_channel"};
    NetworkGraph g = triangle();
    SssSolution s = optimal_sss(g, shared_channel(g));
    c.passed = std::abs(s.delta_star - 0.5) <= 1e-9;
    c.detail = {{"delta_star", s.delta_star}, {"weights", s.weights}};
    return c;
  });
  std::vector<Check> out;
  for (auto& f : fns) {
    try {
      out.push_back(f());
    } catch (const std::exception& e) {
      out.push_back(Check("flows", false, {{"error", e.what()}}));
    }
  }
  return out;
}

std::vector<Check> fmux_checks(std::uint64_t seed) {
  std::vector<Check> out;
  const std::vector<FunctionSpec> specs = {parse_function_spec("parity"), parse_function_spec("max", 2, 16),
                                           parse_function_spec("kth", 2, 16),
                                           parse_function_spec("kth", 3, 10)};
  for (const auto& spec : specs) {
    Check c{"divisibility_" + function_name(spec.kind) +
            (spec.kind == FunctionKind::kth ? std::to_string(spec.k) : "")};
    try {
      FmuxFunction f(spec);
      Rng rng(seed + static_cast<std::uint64_t>(spec.k) * 17 + static_cast<std::uint64_t>(spec.kind));
      int bad = 0;
      const int trials = 2000;
      for (int t = 0; t < trials; ++t) {
        const std::size_t n = 1 + rng.index(10);
        std::vector<int> values(n);
        for (auto& v : values) v = static_cast<int>(rng.index(static_cast<std::uint64_t>(f.alphabet_size())));
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng.engine());
        const std::size_t parts = 1 + rng.index(n);
        std::vector<std::vector<std::size_t>> partition(parts);
        for (std::size_t i = 0; i < n; ++i) partition[i < parts ? i : rng.index(parts)].push_back(order[i]);
        if (!f.check_divisible(partition, values)) ++bad;
        // Shuffled sequential merge must give the same payload.
        std::vector<int> shuffled(n);
        for (std::size_t i = 0; i < n; ++i) shuffled[i] = values[order[i]];
        if (!(f.lift_and_combine(values) == f.lift_and_combine(shuffled))) ++bad;
      }
      c.passed = bad == 0;
      c.detail = {{"trials", trials}, {"failures", bad}};
    } catch (const std::exception& e) {
      c.detail = {{"error", e.what()}};
    }
    out.push_back(std::move(c));
  }
  return out;
}

Check wireline_oracle_check(const std::string& name, const NetworkGraph& g, FunctionSpec spec,
                            double lambda, double horizon, bool cyclic, std::uint64_t seed) {
  Check c{name};
  try {
    WirelineOptions o;
    o.lambda = lambda;
    o.seed = seed;
    o.horizon = horizon;
    o.sample_every = horizon / 10;
    o.allow_cyclic = cyclic;
    o.check_invariants = true;
    WirelineSimulator sim(g, FmuxFunction(spec), o);
    TraceMetrics m = sim.run();
    c.passed = m.oracle_checks >= 10000 && m.events >= 10000;
    c.detail = {{"completed", m.completed},
                {"oracle_checks", m.oracle_checks},
                {"events", m.events},
                {"invariant_checks", m.invariant_checks}};
  } catch (const std::exception& e) {
    c.detail = {{"error", e.what()}};
  }
  return c;
}

std::vector<Check> wireline_checks(std::uint64_t seed) {
  std::vector<Check> out;
  out.push_back(wireline_oracle_check("oracle_and_footprints_triangle_parity", triangle(),
                                      parse_function_spec("parity"), 0.8, 14000, false, seed));
  out.push_back(wireline_oracle_check("oracle_and_footprints_triangle_max", triangle(),
                                      parse_function_spec("max", 2, 16), 0.8, 14000, false, seed));
  out.push_back(wireline_oracle_check("oracle_and_footprints_k5_kth", k5(),
                                      parse_function_spec("kth", 2, 16), 3.0, 4000, true, seed));

  Check c{"counting_lemma"};
  try {
    Rng rng(seed + 99);
    json per = json::array();
    bool ok = true;
    GenerateParams lp;
    lp.nodes = 4;
    const std::vector<std::pair<std::string, NetworkGraph>> graphs = {
        {"triangle", triangle()}, {"line4", generate(GraphKind::line, lp)}};
    for (const auto& [gname, g] : graphs) {
      const std::size_t sets = valid_footprint_sets(g).size();
      for (double alpha : {0.1, 1.0, 10.0}) {
        int fails = 0;
        json example;
        for (int t = 0; t < 10000; ++t) {
          std::vector<double> x(sets);
          for (auto& v : x) v = rng.bernoulli(0.3) ? 0.0 : rng.uniform01();
          CountingLemmaResult r = verify_counting_lemma(g, x, alpha);
          if (!r.holds) {
            if (fails == 0)
              example = {{"x", x}, {"condition", r.violated_condition}, {"set", r.set},
                         {"u", r.u}, {"v", r.v}};
            ++fails;
          }
        }
        ok = ok && fails == 0;
        json entry = {{"graph", gname}, {"alpha", alpha}, {"vectors", 10000}, {"violations", fails}};
        if (fails) entry["first_violation"] = example;
        per.push_back(entry);
      }
    }
    c.passed = ok;
    c.detail = per;
  } catch (const std::exception& e) {
    c.detail = {{"error", e.what()}};
  }
  out.push_back(std::move(c));
  return out;
}

Check wireless_check(const std::string& name, const NetworkGraph& g, const ScheduleSet& sched,
                     const std::vector<AggregationTree>& trees, PolicyConfig policy, double lambda,
                     std::uint64_t horizon, std::uint64_t seed) {
  Check c{name};
  try {
    WirelessOptions o;
    o.arrivals.mean = lambda;
    o.seed = seed;
    o.horizon = horizon;
    o.sample_every = horizon / 10;
    o.check_invariants = true;
    WirelessSimulator sim(g, sched, trees, FmuxFunction(parse_function_spec("kth", 2, 16)), policy, o);
    WirelessMetrics m = sim.run();
    c.passed = m.completed >= 10000 && m.conservation_checks == m.completed;
    c.detail = {{"completed", m.completed},
                {"type_at_checks", m.type_at_checks},
                {"conservation_checks", m.conservation_checks},
                {"oracle_checks", m.oracle_checks}};
  } catch (const std::exception& e) {
    c.detail = {{"error", e.what()}};
  }
  return c;
}

std::vector<Check> wireless_checks(std::uint64_t seed) {
  std::vector<Check> out;
  NetworkGraph tri = triangle();
  ScheduleSet shared = shared_channel(tri);
  out.push_back(wireless_check("type_at_shared_channel_greedy", tri, shared,
                               enumerate_aggregation_trees(tri), PolicyConfig{}, 0.45, 30000, seed));
  try {
    StaticSssPlan plan = static_sss_policy(tri, shared);
    out.push_back(wireless_check("type_at_shared_channel_static", tri, shared, plan.trees,
                                 plan.policy, 0.45, 30000, seed));
  } catch (const std::exception& e) {
    out.push_back(Check("type_at_shared_channel_static", false, {{"error", e.what()}}));
  }
  NetworkGraph g5 = k5();
  out.push_back(wireless_check("type_at_k5_greedy", g5, ScheduleSet::wireline(g5),
                               enumerate_aggregation_trees(g5), PolicyConfig{}, 3.0, 4000, seed));
  return out;
}

}  // namespace

json verify(const std::string& suite, const VerifyOptions& options) {
  static const std::vector<std::string> suites = {"flows", "fmux", "wireline", "wireless"};
  if (suite != "all" && std::find(suites.begin(), suites.end(), suite) == suites.end())
    throw BadParams("unknown suite: " + suite);
  json report = {{"suite", suite}, {"seed", options.seed}, {"suites", json::object()}};
  bool all_ok = true;
  for (const auto& s : suites) {
    if (suite != "all" && suite != s) continue;
    std::vector<Check> checks;
    if (s == "flows") checks = flows_checks(options.seed);
    if (s == "fmux") checks = fmux_checks(options.seed);
    if (s == "wireline") checks = wireline_checks(options.seed);
    if (s == "wireless") checks = wireless_checks(options.seed);
    json arr = json::array();
    bool ok = true;
    for (const auto& c : checks) {
      ok = ok && c.passed;
      arr.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    }
    report["suites"][s] = {{"passed", ok}, {"checks", arr}};
    all_ok = all_ok && ok;
  }
  report["passed"] = all_ok;
  return report;
}

}  // namespace fmuxnet
