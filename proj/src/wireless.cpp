#include "fmuxnet/wireless.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "fmuxnet/errors.hpp"

namespace fmuxnet {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

std::vector<double> normalized_cdf(std::span<const double> w, const char* what) {
  double total = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw BadParams(std::string(what) + ": negative weight");
    total += x;
  }
  if (!(total > 0.0)) throw BadParams(std::string(what) + ": weights sum to zero");
  std::vector<double> cdf(w.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i] / total;
    cdf[i] = acc;
  }
  cdf.back() = 1.0;
  return cdf;
}

std::size_t sample_cdf(const std::vector<double>& cdf, Rng& rng) {
  double u = rng.uniform01();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) --it;
  return static_cast<std::size_t>(it - cdf.begin());
}

template <class Better>
std::size_t arg_uniform(std::span<const double> values, Rng& rng, Better better) {
  if (values.empty()) throw BadParams("empty argument list");
  std::size_t best = 0;
  std::size_t ties = 1;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (better(values[i], values[best])) {
      best = i;
      ties = 1;
    } else if (values[i] == values[best]) {
      ++ties;
    }
  }
  if (ties == 1) return best;
  std::uint64_t pick = rng.index(ties);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == values[best]) {
      if (pick == 0) return i;
      --pick;
    }
  }
  return best;
}

}  // namespace

std::uint64_t ArrivalProcess::sample(Rng& rng, std::uint64_t slot) const {
  switch (law) {
    case ArrivalLaw::poisson:
      return rng.poisson(mean);
    case ArrivalLaw::bernoulli_batch:
      return rng.bernoulli(mean / batch) ? static_cast<std::uint64_t>(batch) : 0;
    case ArrivalLaw::deterministic: {
      // Evenly spread: floor((t+1) lambda) - floor(t lambda).
      auto hi = static_cast<std::uint64_t>(std::floor(static_cast<double>(slot + 1) * mean));
      auto lo = static_cast<std::uint64_t>(std::floor(static_cast<double>(slot) * mean));
      return hi - lo;
    }
  }
  return 0;
}

double ArrivalProcess::second_moment() const {
  switch (law) {
    case ArrivalLaw::poisson:
      return mean + mean * mean;
    case ArrivalLaw::bernoulli_batch:
      return mean * batch;
    case ArrivalLaw::deterministic: {
      double f = std::floor(mean);
      double p = mean - f;
      return (1 - p) * f * f + p * (f + 1) * (f + 1);
    }
  }
  return 0.0;
}

ArrivalLaw parse_arrival_law(const std::string& name) {
  if (name == "poisson") return ArrivalLaw::poisson;
  if (name == "bernoulli_batch" || name == "bernoulli-batch") return ArrivalLaw::bernoulli_batch;
  if (name == "deterministic") return ArrivalLaw::deterministic;
  throw BadParams("unknown arrival law: " + name);
}

std::size_t argmin_uniform(std::span<const double> values, Rng& rng) {
  return arg_uniform(values, rng, [](double a, double b) { return a < b; });
}

std::size_t argmax_uniform(std::span<const double> values, Rng& rng) {
  return arg_uniform(values, rng, [](double a, double b) { return a > b; });
}

WirelessSimulator::WirelessSimulator(const NetworkGraph& g, ScheduleSet schedules,
                                     std::vector<AggregationTree> trees, const FmuxFunction& f,
                                     PolicyConfig policy, WirelessOptions options)
    : g_(g),
      schedules_(std::move(schedules)),
      trees_(std::move(trees)),
      f_(f),
      policy_(std::move(policy)),
      opt_(options),
      rng_(options.seed) {
  if (g_.node_count() > 64) throw BadParams("wireless simulator supports at most 64 nodes");
  if (trees_.empty()) throw BadParams("tree set is empty");
  if (schedules_.schedules.empty()) throw BadParams("schedule set is empty");
  if (opt_.arrivals.mean < 0.0 || !std::isfinite(opt_.arrivals.mean))
    throw BadParams("arrival rate must be finite and nonnegative");
  if (opt_.arrivals.law == ArrivalLaw::bernoulli_batch &&
      (opt_.arrivals.batch < 1 || opt_.arrivals.mean > opt_.arrivals.batch))
    throw BadParams("bernoulli_batch needs batch >= 1 and mean <= batch");
  if (opt_.sample_every == 0) throw BadParams("sample interval must be positive");
  if (policy_.routing == RoutingPolicy::single_tree && trees_.size() != 1)
    throw MultiTreeConfig("single-tree routing with " + std::to_string(trees_.size()) + " trees");
  schedules_.validate(g_);

  for (const auto& t : trees_) {
    if (t.parents().size() != static_cast<std::size_t>(g_.node_count()) || t.aggregator() != g_.aggregator())
      throw BadParams("tree does not match the graph");
  }

  sensors_ = g_.sensors();
  for (NodeId s : sensors_) sensor_mask_ |= std::uint64_t{1} << s;

  trees_of_link_.assign(g_.link_count(), {});
  for (std::size_t t = 0; t < trees_.size(); ++t)
    for (LinkIndex l : trees_[t].links()) trees_of_link_[l].push_back(t);

  rates_.assign(schedules_.schedules.size(), std::vector<std::size_t>(g_.link_count(), 0));
  for (std::size_t s = 0; s < schedules_.schedules.size(); ++s) {
    RateVector r = schedules_.rate_vector(g_, s);
    for (LinkIndex l = 0; l < r.size(); ++l) {
      if (r[l] != std::floor(r[l]))
        throw BadParams("wireless schedule rates must be whole packets per slot");
      rates_[s][l] = static_cast<std::size_t>(r[l]);
    }
  }

  if (policy_.routing == RoutingPolicy::fixed_split) {
    if (policy_.split_weights.size() != trees_.size())
      throw BadParams("fixed-split needs one weight per tree");
    split_cdf_ = normalized_cdf(policy_.split_weights, "fixed-split");
  }
  if (policy_.scheduling == SchedulingPolicy::static_sss) {
    if (policy_.schedule_weights.size() != schedules_.schedules.size())
      throw BadParams("static policy needs one weight per schedule");
    schedule_cdf_ = normalized_cdf(policy_.schedule_weights, "schedule weights");
  }

  std::size_t cells = g_.node_count() * trees_.size();
  useful_.assign(cells, {});
  waiting_.assign(cells, 0);
  tree_useful_.assign(trees_.size(), 0);
  metrics_.schedule_counts.assign(schedules_.schedules.size(), 0);
  metrics_.tree_assignments.assign(trees_.size(), 0);
}

std::uint64_t WirelessSimulator::useful_queue(NodeId n, std::size_t tree) const {
  return useful_[qindex(n, tree)].size();
}

std::uint64_t WirelessSimulator::waiting_queue(NodeId n, std::size_t tree) const {
  return waiting_[qindex(n, tree)];
}

double WirelessSimulator::lyapunov_value() const {
  double v = 0.0;
  for (const auto& q : useful_) {
    double x = static_cast<double>(q.size());
    v += x * x;
  }
  return v;
}

void WirelessSimulator::push_useful(NodeId n, std::size_t tree, std::size_t handle) {
  auto& q = useful_[qindex(n, tree)];
  std::uint64_t id = pool_[handle].id;
  auto it = q.end();
  while (it != q.begin() && pool_[*(it - 1)].id > id) --it;
  q.insert(it, handle);
  ++tree_useful_[tree];
}

std::vector<std::uint64_t> WirelessSimulator::inject_rounds(std::uint64_t count, std::size_t tree) {
  if (tree >= trees_.size()) throw BadParams("tree index out of range");
  const AggregationTree& t = trees_[tree];
  std::vector<std::uint64_t> ids;
  ids.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    std::size_t h;
    if (!free_.empty()) {
      h = free_.back();
      free_.pop_back();
    } else {
      h = pool_.size();
      pool_.emplace_back();
    }
    Round& r = pool_[h];
    r.id = next_id_++;
    r.tree = tree;
    r.arrival_slot = slot_;
    r.sensed.assign(g_.node_count(), 0);
    r.payload.assign(g_.node_count(), f_.identity());
    r.contributors.assign(g_.node_count(), 0);
    r.delivered.assign(g_.node_count(), 0);
    r.stage.assign(g_.node_count(), NodeStage::waiting);
    r.sent_mask = 0;
    r.crossings = 0;
    for (NodeId s : sensors_) {
      int v = static_cast<int>(rng_.index(static_cast<std::uint64_t>(f_.alphabet_size())));
      r.sensed[s] = v;
      r.payload[s] = f_.lift(v);
      r.contributors[s] = std::uint64_t{1} << s;
    }
    for (NodeId n = 0; n < static_cast<NodeId>(g_.node_count()); ++n) {
      if (n != g_.aggregator() && t.is_leaf(n)) {
        r.stage[n] = NodeStage::useful;
        push_useful(n, tree, h);
      } else {
        ++waiting_[qindex(n, tree)];
      }
    }
    ++live_;
    ++metrics_.arrivals;
    ++metrics_.tree_assignments[tree];
    ids.push_back(r.id);
  }
  return ids;
}

std::size_t WirelessSimulator::greedy_tree_load() {
  std::vector<double> w(tree_useful_.begin(), tree_useful_.end());
  return argmin_uniform(w, rng_);
}

double WirelessSimulator::link_weight(LinkIndex link) const {
  NodeId i = g_.link(link).from;
  double best = 0.0;
  for (std::size_t t : trees_of_link_[link])
    best = std::max(best, static_cast<double>(useful_[qindex(i, t)].size()));
  return best;
}

double WirelessSimulator::schedule_weight(std::size_t schedule) const {
  double w = 0.0;
  const auto& rate = rates_[schedule];
  for (LinkIndex l = 0; l < rate.size(); ++l)
    if (rate[l] > 0) w += link_weight(l) * static_cast<double>(rate[l]);
  return w;
}

ScheduleDecision WirelessSimulator::maxweight_schedule() {
  ScheduleDecision d;
  std::vector<double> p(g_.link_count(), 0.0);
  std::vector<std::size_t> best_tree(g_.link_count(), kNone);
  std::vector<double> cand;
  for (LinkIndex l = 0; l < g_.link_count(); ++l) {
    const auto& ts = trees_of_link_[l];
    if (ts.empty()) continue;
    NodeId i = g_.link(l).from;
    cand.clear();
    for (std::size_t t : ts) cand.push_back(static_cast<double>(useful_[qindex(i, t)].size()));
    double m = *std::max_element(cand.begin(), cand.end());
    if (m <= 0.0) continue;
    p[l] = m;
    best_tree[l] = ts[argmax_uniform(cand, rng_)];
  }
  std::vector<double> weights(schedules_.schedules.size(), 0.0);
  for (std::size_t s = 0; s < weights.size(); ++s) {
    double w = 0.0;
    for (LinkIndex l = 0; l < p.size(); ++l) w += p[l] * static_cast<double>(rates_[s][l]);
    weights[s] = w;
  }
  d.schedule = argmax_uniform(weights, rng_);
  d.weight = weights[d.schedule];
  d.tree_for_link.assign(g_.link_count(), kNone);
  for (LinkIndex l = 0; l < p.size(); ++l)
    if (rates_[d.schedule][l] > 0) d.tree_for_link[l] = best_tree[l];
  if (opt_.check_invariants) {
    for (double w : weights)
      if (w > d.weight) throw InvariantViolation("maxweight choice is not a maximizer");
  }
  return d;
}

ScheduleDecision WirelessSimulator::single_tree_backpressure() {
  if (trees_.size() != 1)
    throw MultiTreeConfig("single-tree backpressure with " + std::to_string(trees_.size()) +
                          " trees");
  return maxweight_schedule();
}

ScheduleDecision WirelessSimulator::static_sss_schedule() {
  if (schedule_cdf_.empty()) throw BadParams("static policy has no schedule weights");
  ScheduleDecision d;
  d.schedule = sample_cdf(schedule_cdf_, rng_);
  d.weight = schedule_weight(d.schedule);
  // kNone on a scheduled link means: serve all trees through it in round-id order.
  d.tree_for_link.assign(g_.link_count(), kNone);
  return d;
}

void WirelessSimulator::transmit(LinkIndex link, std::size_t tree, std::uint64_t count,
                                 std::vector<std::pair<NodeId, std::size_t>>& touched) {
  const NodeId i = g_.link(link).from;
  const NodeId j = g_.link(link).to;
  auto& q = useful_[qindex(i, tree)];
  for (std::uint64_t k = 0; k < count && !q.empty(); ++k) {
    std::size_t h = q.front();
    q.pop_front();
    --tree_useful_[tree];
    Round& r = pool_[h];
    const AggregationTree& t = trees_[r.tree];
    if (opt_.check_invariants) {
      ++metrics_.type_at_checks;
      if (r.stage[i] != NodeStage::useful || r.delivered[i] != t.children(i).size())
        throw InvariantViolation("Type-AT: round " + std::to_string(r.id) + " sent from node " +
                                 std::to_string(i) + " before aggregation");
      if (t.parent(i) != j) throw InvariantViolation("transmission off the assigned tree");
    }
    if (r.contributors[j] & r.contributors[i])
      throw OracleMismatch("round " + std::to_string(r.id) + " merged a contribution twice");
    r.payload[j] = f_.combine(r.payload[j], r.payload[i]);
    r.contributors[j] |= r.contributors[i];
    r.payload[i] = f_.identity();
    r.contributors[i] = 0;
    r.stage[i] = NodeStage::sent;
    r.sent_mask |= std::uint64_t{1} << i;
    ++r.crossings;
    ++r.delivered[j];
    ++metrics_.transmissions;
    touched.emplace_back(j, h);
  }
}

void WirelessSimulator::complete(std::size_t handle) {
  Round& r = pool_[handle];
  const NodeId a = g_.aggregator();
  if (r.contributors[a] != sensor_mask_)
    throw OracleMismatch("round " + std::to_string(r.id) + " completed with missing sensors");
  int got = f_.finalize(r.payload[a]);
  int want = f_.offline_evaluate(r.sensed);
  ++metrics_.oracle_checks;
  if (got != want)
    throw OracleMismatch("round " + std::to_string(r.id) + ": in-network " +
                         std::to_string(got) + " vs offline " + std::to_string(want));
  if (opt_.check_invariants) {
    ++metrics_.conservation_checks;
    if (r.sent_mask != sensor_mask_ ||
        r.crossings != static_cast<int>(g_.node_count()) - 1)
      throw InvariantViolation("flow conservation broken for round " + std::to_string(r.id));
  }
  latency_sum_ += static_cast<double>(slot_ - r.arrival_slot + 1);
  ++metrics_.completed;
  metrics_.mean_latency = latency_sum_ / static_cast<double>(metrics_.completed);
  --live_;
  r.sensed.clear();
  r.payload.clear();
  free_.push_back(handle);
}

void WirelessSimulator::slot_update(const ScheduleDecision& decision) {
  if (decision.schedule >= schedules_.schedules.size()) throw BadParams("schedule outside the set");
  ++metrics_.schedule_counts[decision.schedule];
  std::vector<std::pair<NodeId, std::size_t>> touched;
  const auto& rate = rates_[decision.schedule];
  const bool merge_trees = policy_.scheduling == SchedulingPolicy::static_sss;

  // Decide every link's departures from the queues as they stood at slot start.
  struct Plan {
    LinkIndex link;
    std::size_t tree;
    std::uint64_t count;
  };
  std::vector<Plan> plans;
  for (LinkIndex l = 0; l < rate.size(); ++l) {
    if (rate[l] == 0 || trees_of_link_[l].empty()) continue;
    NodeId i = g_.link(l).from;
    std::size_t t = decision.tree_for_link.empty() ? kNone : decision.tree_for_link[l];
    if (t != kNone) {
      std::uint64_t n = std::min<std::uint64_t>(rate[l], useful_[qindex(i, t)].size());
      if (n > 0) plans.push_back({l, t, n});
    } else if (merge_trees) {
      // Lowest round id first across every tree using this link.
      const auto& ts = trees_of_link_[l];
      std::vector<std::size_t> pos(ts.size(), 0);
      std::vector<std::uint64_t> take(ts.size(), 0);
      for (std::size_t k = 0; k < rate[l]; ++k) {
        std::size_t pick = kNone;
        std::uint64_t best = 0;
        for (std::size_t m = 0; m < ts.size(); ++m) {
          const auto& q = useful_[qindex(i, ts[m])];
          if (pos[m] < q.size() && (pick == kNone || pool_[q[pos[m]]].id < best)) {
            pick = m;
            best = pool_[q[pos[m]]].id;
          }
        }
        if (pick == kNone) break;
        ++pos[pick];
        ++take[pick];
      }
      for (std::size_t m = 0; m < ts.size(); ++m)
        if (take[m] > 0) plans.push_back({l, ts[m], take[m]});
    }
  }
  for (const auto& p : plans) transmit(p.link, p.tree, p.count, touched);

  // Internal transfers: a round aggregates at a node once every tree child delivered.
  std::sort(touched.begin(), touched.end(), [&](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first < y.first;
    return pool_[x.second].id < pool_[y.second].id;
  });
  touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
  for (auto [j, h] : touched) {
    Round& r = pool_[h];
    const AggregationTree& t = trees_[r.tree];
    if (r.stage[j] != NodeStage::waiting || r.delivered[j] != t.children(j).size()) continue;
    --waiting_[qindex(j, r.tree)];
    if (j == g_.aggregator()) {
      r.stage[j] = NodeStage::sent;
      complete(h);
    } else {
      r.stage[j] = NodeStage::useful;
      push_useful(j, r.tree, h);
    }
  }
}

void WirelessSimulator::step() {
  std::uint64_t count = opt_.arrivals.sample(rng_, slot_);
  if (count > 0) {
    switch (policy_.routing) {
      case RoutingPolicy::greedy_tree_loading:
        inject_rounds(count, greedy_tree_load());
        break;
      case RoutingPolicy::single_tree:
        inject_rounds(count, 0);
        break;
      case RoutingPolicy::fixed_split:
        for (std::uint64_t k = 0; k < count; ++k) inject_rounds(1, sample_cdf(split_cdf_, rng_));
        break;
    }
  }
  ScheduleDecision d;
  if (policy_.scheduling == SchedulingPolicy::static_sss)
    d = static_sss_schedule();
  else if (policy_.routing == RoutingPolicy::single_tree)
    d = single_tree_backpressure();
  else
    d = maxweight_schedule();
  slot_update(d);
  ++slot_;
  if (slot_ % opt_.sample_every == 0) record_sample();
}

void WirelessSimulator::record_sample() {
  WirelessSample s;
  s.slot = slot_;
  for (const auto& q : useful_) s.total_useful += q.size();
  for (std::uint64_t w : waiting_) s.total_nonuseful += w;
  s.lyapunov = lyapunov_value();
  s.completed = metrics_.completed;
  s.in_flight = live_;
  s.mean_latency = metrics_.mean_latency;
  s.tree_load.resize(trees_.size());
  for (std::size_t t = 0; t < trees_.size(); ++t)
    s.tree_load[t] = static_cast<double>(metrics_.tree_assignments[t]) / static_cast<double>(slot_);
  metrics_.samples.push_back(std::move(s));
}

WirelessMetrics WirelessSimulator::run() {
  while (slot_ < opt_.horizon) step();
  return metrics_;
}

StaticSssPlan static_sss_policy(const NetworkGraph& g, const ScheduleSet& schedules,
                                std::size_t tree_limit) {
  return static_sss_policy(g, schedules, enumerate_aggregation_trees(g, tree_limit));
}

StaticSssPlan static_sss_policy(const NetworkGraph& g, const ScheduleSet& schedules,
                                const std::vector<AggregationTree>& candidates) {
  StaticSssPlan plan;
  plan.split = optimal_sss(g, schedules);
  TreePacking packing = tree_packing_lp(g, plan.split.rates, candidates);
  plan.packing = packing;
  plan.policy.routing = RoutingPolicy::fixed_split;
  plan.policy.scheduling = SchedulingPolicy::static_sss;
  plan.policy.schedule_weights = plan.split.weights;
  const double floor_weight = 1e-9 * std::max(1.0, packing.total);
  for (std::size_t t = 0; t < packing.trees.size(); ++t) {
    if (packing.weights[t] > floor_weight) {
      plan.trees.push_back(packing.trees[t]);
      plan.policy.split_weights.push_back(packing.weights[t]);
    }
  }
  if (plan.trees.empty()) throw BadParams("tree packing has zero value");
  return plan;
}

std::size_t floor_packet_schedules(ScheduleSet& schedules, double bits_per_packet) {
  if (!(bits_per_packet > 0.0)) throw BadParams("bits per packet must be positive");
  std::size_t floored = 0;
  for (auto& s : schedules.schedules) {
    for (double& r : s.rates) {
      double p = r / bits_per_packet;
      double f = std::floor(p + 1e-9);
      if (std::abs(p - f) > 1e-9) ++floored;
      r = f;
    }
  }
  if (floored > 0)
    std::clog << "fmuxnet: rounded down " << floored << " schedule rate(s) to whole packets\n";
  return floored;
}

}  // namespace fmuxnet
