#include "fixtures.hpp"

#include <fmuxnet/errors.hpp>
#include <fmuxnet/flows.hpp>
#include <fmuxnet/fmux_function.hpp>
#include <fmuxnet/harness.hpp>
#include <fmuxnet/wireless.hpp>

#include <boost/math/distributions/chi_squared.hpp>
#include <doctest.h>

#include <cstdint>

using namespace fmuxnet;

namespace {

const FmuxFunction kMax(parse_function_spec("max"));

ScheduleSet singletons(const NetworkGraph& g) {
  ScheduleSet s;
  for (std::size_t l = 0; l < g.link_count(); ++l) s.schedules.push_back({{l}, {1.0}});
  return s;
}

NetworkGraph star3() { return NetworkGraph::build(3, 0, {{1, 0}, {2, 0}}, {1, 1}); }

AggregationTree star_tree(const NetworkGraph& g) {
  std::vector<NodeId> parent(g.node_count(), g.aggregator());
  parent[g.aggregator()] = -1;
  return AggregationTree(g, parent);
}

// Depth-two trees on K5: sensor i reports to a, every other sensor goes through i.
std::vector<AggregationTree> depth_two_trees(const NetworkGraph& k5) {
  std::vector<AggregationTree> trees;
  for (NodeId i = 1; i <= 4; ++i) {
    std::vector<NodeId> parent(5, i);
    parent[0] = -1;
    parent[i] = 0;
    trees.emplace_back(k5, parent);
  }
  return trees;
}

WirelessOptions opts(double lambda, std::uint64_t seed, std::uint64_t horizon,
                     std::uint64_t sample_every = 10) {
  WirelessOptions o;
  o.arrivals.mean = lambda;
  o.seed = seed;
  o.horizon = horizon;
  o.sample_every = sample_every;
  return o;
}

PolicyConfig single_tree() {
  PolicyConfig p;
  p.routing = RoutingPolicy::single_tree;
  return p;
}

Verdict verdict_of(const WirelessMetrics& m, double lambda, int nodes) {
  std::vector<double> t, q;
  for (const auto& s : m.samples) {
    t.push_back(static_cast<double>(s.slot));
    q.push_back(static_cast<double>(s.in_flight));
  }
  return detect_stability(t, q, lambda, nodes).verdict;
}

}  // namespace

TEST_CASE("argmin with uniform ties") {
  Rng rng(1);
  std::vector<double> w{5, 3, 9};
  CHECK(argmin_uniform(w, rng) == 1);
  CHECK(argmax_uniform(w, rng) == 2);

  std::vector<double> tie{0, 0};
  int first = 0;
  for (int i = 0; i < 10000; ++i) first += argmin_uniform(tie, rng) == 0;
  CHECK(first > 4700);
  CHECK(first < 5300);

  auto g = fixtures::triangle();
  WirelessSimulator sim(g, singletons(g), enumerate_aggregation_trees(g), kMax, {}, opts(0, 1, 10));
  int zero = 0;
  for (int i = 0; i < 10000; ++i) zero += sim.greedy_tree_load() == 0;
  CHECK(zero > 4700);
  CHECK(zero < 5300);
}

TEST_CASE("MaxWeight picks the heaviest schedule") {
  auto g = fixtures::triangle();
  auto trees = enumerate_aggregation_trees(g);  // 0: star, 1: 2 -> 1 -> a
  WirelessSimulator sim(g, singletons(g), trees, kMax, {}, opts(0, 1, 10));
  auto empty = sim.maxweight_schedule();
  CHECK(empty.weight == 0.0);

  sim.inject_rounds(7, 1);
  sim.inject_rounds(3, 0);
  CHECK(sim.useful_queue(2, 1) == 7);
  CHECK(sim.useful_queue(1, 0) == 3);
  CHECK(sim.waiting_queue(1, 1) == 7);
  CHECK(sim.link_weight(*g.find_link(2, 1)) == 7.0);
  CHECK(sim.link_weight(*g.find_link(1, 0)) == 3.0);
  auto d = sim.maxweight_schedule();
  CHECK(d.schedule == *g.find_link(2, 1));
  CHECK(d.weight == 7.0);
  CHECK(d.tree_for_link[*g.find_link(2, 1)] == 1);
}

TEST_CASE("MaxWeight against brute force along a trajectory") {
  auto g = fixtures::triangle();
  ScheduleSet s = singletons(g);
  s.schedules.push_back({{0, 2}, {1.0, 2.0}});
  WirelessSimulator sim(g, s, enumerate_aggregation_trees(g), kMax, {}, opts(0.6, 3, 10));
  for (int slot = 0; slot < 2000; ++slot) {
    auto d = sim.maxweight_schedule();
    double best = 0.0;
    for (std::size_t k = 0; k < s.schedules.size(); ++k) best = std::max(best, sim.schedule_weight(k));
    CHECK(d.weight == best);
    CHECK(sim.schedule_weight(d.schedule) == best);
    sim.step();
  }
}

TEST_CASE("slot update") {
  SUBCASE("line of two sensors completes in two slots") {
    auto g = fixtures::line(3);
    WirelessSimulator sim(g, ScheduleSet::wireline(g), {AggregationTree(g, {-1, 0, 1})}, kMax,
                          single_tree(), opts(0, 1, 10, 1));
    sim.inject_rounds(1, 0);
    CHECK(sim.useful_queue(2, 0) == 1);
    CHECK(sim.waiting_queue(1, 0) == 1);
    sim.step();
    CHECK(sim.metrics().completed == 0);
    CHECK(sim.useful_queue(1, 0) == 1);  // aggregated after the slot-1 delivery
    sim.step();
    CHECK(sim.metrics().completed == 1);
    CHECK(sim.metrics().mean_latency == 2.0);
    CHECK(sim.metrics().oracle_checks == 1);
  }
  SUBCASE("rate above the queue moves what is there") {
    auto g = star3();
    ScheduleSet s;
    s.schedules.push_back({{0}, {3.0}});
    WirelessSimulator sim(g, s, {star_tree(g)}, kMax, single_tree(), opts(0, 1, 10));
    sim.inject_rounds(1, 0);
    ScheduleDecision d{0, 0.0, {0, SIZE_MAX}};
    sim.slot_update(d);
    CHECK(sim.useful_queue(1, 0) == 0);
    CHECK(sim.metrics().transmissions == 1);
  }
  SUBCASE("an empty schedule leaves queues alone") {
    auto g = star3();
    ScheduleSet s;
    s.schedules.push_back({});
    WirelessSimulator sim(g, s, {star_tree(g)}, kMax, single_tree(), opts(0, 1, 10));
    sim.inject_rounds(4, 0);
    for (int i = 0; i < 5; ++i) sim.step();
    CHECK(sim.useful_queue(1, 0) == 4);
    CHECK(sim.useful_queue(2, 0) == 4);
    CHECK(sim.metrics().transmissions == 0);
  }
}

TEST_CASE("quadratic Lyapunov value") {
  auto g = star3();
  WirelessSimulator sim(g, singletons(g), {star_tree(g)}, kMax, single_tree(), opts(0, 1, 10));
  CHECK(sim.lyapunov_value() == 0.0);
  sim.inject_rounds(3, 0);
  CHECK(sim.lyapunov_value() == 18.0);
  sim.slot_update({0, 0.0, {0, SIZE_MAX}});
  CHECK(sim.useful_queue(1, 0) == 2);
  CHECK(sim.lyapunov_value() == 13.0);
}

TEST_CASE("Lyapunov drift below and above capacity") {
  auto g = fixtures::triangle();
  auto trees = enumerate_aggregation_trees(g);
  auto run = [&](double lambda) {
    return WirelessSimulator(g, singletons(g), trees, kMax, {}, opts(lambda, 5, 40000, 100)).run();
  };
  auto low = run(0.3);
  auto high = run(0.7);
  const auto& ls = low.samples;
  const auto& hs = high.samples;
  double low_max = 0.0;
  for (std::size_t i = ls.size() / 2; i < ls.size(); ++i) low_max = std::max(low_max, ls[i].lyapunov);
  CHECK(low_max < 500.0);
  // Queues grow linearly, so V grows about fourfold when time doubles.
  CHECK(hs.back().lyapunov > 3.0 * hs[hs.size() / 2 - 1].lyapunov);
}

TEST_CASE("static randomized schedule") {
  auto g = fixtures::triangle();
  auto trees = enumerate_aggregation_trees(g);

  SUBCASE("degenerate split uses one schedule") {
    PolicyConfig p{.routing = RoutingPolicy::fixed_split, .scheduling = SchedulingPolicy::static_sss,
                   .split_weights = {1.0, 0.0}, .schedule_weights = {0.0, 1.0, 0.0}};
    WirelessSimulator sim(g, singletons(g), trees, kMax, p, opts(0.1, 2, 1000));
    auto m = sim.run();
    CHECK(m.schedule_counts == std::vector<std::uint64_t>{0, 1000, 0});
  }
  SUBCASE("schedule frequencies follow the optimal split") {
    auto plan = static_sss_policy(g, singletons(g));
    CHECK(plan.split.delta_star == doctest::Approx(0.5));
    WirelessSimulator sim(g, singletons(g), plan.trees, kMax, plan.policy, opts(0.2, 8, 100000, 1000));
    auto m = sim.run();
    double chi2 = 0.0;
    int dof = -1;
    for (std::size_t k = 0; k < m.schedule_counts.size(); ++k) {
      const double expect = 1e5 * plan.policy.schedule_weights[k];
      if (expect <= 0.0) {
        CHECK(m.schedule_counts[k] == 0);
        continue;
      }
      const double diff = static_cast<double>(m.schedule_counts[k]) - expect;
      chi2 += diff * diff / expect;
      ++dof;
    }
    REQUIRE(dof >= 1);
    boost::math::chi_squared dist(dof);
    CHECK(boost::math::cdf(boost::math::complement(dist, chi2)) > 0.01);
  }
  SUBCASE("complete graph with all links active every slot") {
    auto k5 = fixtures::k5();
    auto plan = static_sss_policy(k5, ScheduleSet::wireline(k5));
    CHECK(plan.split.delta_star == doctest::Approx(4.0));
    WirelessSimulator sim(k5, ScheduleSet::wireline(k5), plan.trees, kMax, plan.policy,
                          opts(3.6, 1, 20000));
    CHECK(verdict_of(sim.run(), 3.6, 5) == Verdict::stable);
  }
}

TEST_CASE("single-tree backpressure") {
  auto k5 = fixtures::k5();
  CHECK_THROWS_AS(WirelessSimulator(k5, ScheduleSet::wireline(k5), depth_two_trees(k5), kMax,
                                    single_tree(), opts(1, 1, 10)),
                  MultiTreeConfig);
  WirelessSimulator multi(k5, ScheduleSet::wireline(k5), depth_two_trees(k5), kMax, {}, opts(1, 1, 10));
  CHECK_THROWS_AS(multi.single_tree_backpressure(), MultiTreeConfig);

  auto star = [&](double lambda) {
    WirelessSimulator sim(k5, ScheduleSet::wireline(k5), {star_tree(k5)}, kMax, single_tree(),
                          opts(lambda, 2, 20000));
    CHECK(sim.single_tree_backpressure().weight == 0.0);
    return verdict_of(sim.run(), lambda, 5);
  };
  CHECK(star(0.9) == Verdict::stable);
  CHECK(star(1.5) == Verdict::unstable);

  auto line = fixtures::line(4);
  WirelessSimulator sim(line, ScheduleSet::wireline(line), {AggregationTree(line, {-1, 0, 1, 2})},
                        kMax, single_tree(), opts(0.9, 3, 20000));
  CHECK(verdict_of(sim.run(), 0.9, 4) == Verdict::stable);
}

TEST_CASE("greedy loading spreads rounds over symmetric trees") {
  auto k5 = fixtures::k5();
  WirelessSimulator sim(k5, ScheduleSet::wireline(k5), depth_two_trees(k5), kMax, {},
                        opts(3.9, 4, 50000, 100));
  auto m = sim.run();
  const double per_tree = 3.9 / 4.0;
  for (auto n : m.tree_assignments)
    CHECK(static_cast<double>(n) / 50000.0 == doctest::Approx(per_tree).epsilon(0.05));
}

TEST_CASE("invariant checks and determinism") {
  auto g = fixtures::triangle();
  auto trees = enumerate_aggregation_trees(g);
  auto o = opts(0.45, 6, 5000);
  o.check_invariants = true;
  auto a = WirelessSimulator(g, singletons(g), trees, kMax, {}, o).run();
  CHECK(a.completed > 1000);
  CHECK(a.conservation_checks == a.completed);
  CHECK(a.oracle_checks == a.completed);
  CHECK(a.type_at_checks == a.transmissions);
  auto b = WirelessSimulator(g, singletons(g), trees, kMax, {}, o).run();
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].total_useful == b.samples[i].total_useful);
    CHECK(a.samples[i].lyapunov == b.samples[i].lyapunov);
  }
}

TEST_CASE("arrival processes") {
  Rng rng(3);
  ArrivalProcess det{.law = ArrivalLaw::deterministic, .mean = 0.3};
  std::uint64_t total = 0;
  for (std::uint64_t t = 0; t < 1000; ++t) total += det.sample(rng, t);
  CHECK(total == 300);

  ArrivalProcess batch{.law = ArrivalLaw::bernoulli_batch, .mean = 0.6, .batch = 3};
  double sum = 0.0;
  for (std::uint64_t t = 0; t < 100000; ++t) {
    auto k = batch.sample(rng, t);
    CHECK((k == 0 || k == 3));
    sum += static_cast<double>(k);
  }
  CHECK(sum / 1e5 == doctest::Approx(0.6).epsilon(0.02));
  CHECK(ArrivalProcess{.mean = 2.0}.second_moment() == doctest::Approx(6.0));
  CHECK_THROWS_AS(parse_arrival_law("uniform"), BadParams);
}

TEST_CASE("bit rates become whole packets") {
  ScheduleSet s;
  s.schedules.push_back({{0, 1}, {5.0, 4.0}});
  CHECK(floor_packet_schedules(s, 2.0) == 1);
  CHECK(s.schedules[0].rates == std::vector<double>{2.0, 2.0});

  auto g = star3();
  ScheduleSet frac;
  frac.schedules.push_back({{0}, {0.5}});
  CHECK_THROWS_AS(WirelessSimulator(g, frac, {star_tree(g)}, kMax, {}, opts(0, 1, 10)), BadParams);
}
