#include "fmuxnet/flows.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

#include "fmuxnet/errors.hpp"
#include "fmuxnet/fmux_function.hpp"
#include "fmuxnet/lp.hpp"

namespace fmuxnet {

namespace {

constexpr double kFlowEps = 1e-12;

// Residual network for Dinic.
class Dinic {
 public:
  explicit Dinic(int n) : adj_(n), level_(n), it_(n) {}

  void add_edge(int u, int v, double cap) {
    adj_[u].push_back(static_cast<int>(edges_.size()));
    edges_.push_back({v, cap});
    adj_[v].push_back(static_cast<int>(edges_.size()));
    edges_.push_back({u, 0.0});
  }

  double run(int s, int t) {
    double flow = 0.0;
    while (bfs(s, t)) {
      std::fill(it_.begin(), it_.end(), 0);
      while (true) {
        const double f = dfs(s, t, std::numeric_limits<double>::infinity());
        if (f <= kFlowEps) break;
        flow += f;
      }
    }
    return flow;
  }

  std::vector<char> reachable(int s) const {
    std::vector<char> seen(adj_.size(), 0);
    std::vector<int> stack{s};
    seen[s] = 1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int id : adj_[u]) {
        const Edge& e = edges_[id];
        if (e.cap > kFlowEps && !seen[e.to]) {
          seen[e.to] = 1;
          stack.push_back(e.to);
        }
      }
    }
    return seen;
  }

 private:
  struct Edge {
    int to;
    double cap;
  };

  bool bfs(int s, int t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<int> q;
    level_[s] = 0;
    q.push(s);
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int id : adj_[u]) {
        const Edge& e = edges_[id];
        if (e.cap > kFlowEps && level_[e.to] < 0) {
          level_[e.to] = level_[u] + 1;
          q.push(e.to);
        }
      }
    }
    return level_[t] >= 0;
  }

  double dfs(int u, int t, double pushed) {
    if (u == t) return pushed;
    for (int& i = it_[u]; i < static_cast<int>(adj_[u].size()); ++i) {
      const int id = adj_[u][i];
      Edge& e = edges_[id];
      if (e.cap <= kFlowEps || level_[e.to] != level_[u] + 1) continue;
      const double got = dfs(e.to, t, std::min(pushed, e.cap));
      if (got > kFlowEps) {
        e.cap -= got;
        edges_[id ^ 1].cap += got;
        return got;
      }
    }
    return 0.0;
  }

  std::vector<std::vector<int>> adj_;
  std::vector<Edge> edges_;
  std::vector<int> level_;
  std::vector<int> it_;
};

void check_caps(const NetworkGraph& g, std::span<const double> caps) {
  if (caps.size() != g.link_count()) throw BadParams("rate vector length differs from link count");
  for (double c : caps)
    if (!(c >= 0.0)) throw BadParams("rates must be nonnegative");
}

}  // namespace

MaxFlowResult max_flow(const NetworkGraph& g, std::span<const double> caps, NodeId s, NodeId t) {
  check_caps(g, caps);
  if (s == t) throw BadParams("max_flow needs distinct endpoints");
  if (s < 0 || t < 0 || s >= g.node_count() || t >= g.node_count())
    throw BadParams("max_flow endpoint out of range");
  Dinic d(g.node_count());
  for (LinkIndex i = 0; i < g.link_count(); ++i) d.add_edge(g.link(i).from, g.link(i).to, caps[i]);
  MaxFlowResult r;
  r.value = d.run(s, t);
  const auto seen = d.reachable(s);
  for (NodeId n = 0; n < g.node_count(); ++n)
    if (seen[n]) r.source_side.push_back(n);
  return r;
}

MinMincut min_mincut(const NetworkGraph& g, std::span<const double> caps) {
  MinMincut best;
  best.value = std::numeric_limits<double>::infinity();
  for (NodeId i : g.sensors()) {
    const double v = max_flow(g, caps, i, g.aggregator()).value;
    if (v < best.value) {
      best.value = v;
      best.argmin = i;
    }
  }
  return best;
}

AggregationTree::AggregationTree(const NetworkGraph& g, std::vector<NodeId> parent)
    : aggregator_(g.aggregator()), parent_(std::move(parent)) {
  const int n = g.node_count();
  if (static_cast<int>(parent_.size()) != n) throw BadParams("parent map has wrong size");
  parent_[aggregator_] = -1;
  parent_link_.assign(n, SIZE_MAX);
  children_.assign(n, {});
  for (NodeId v = 0; v < n; ++v) {
    if (v == aggregator_) continue;
    const auto l = g.find_link(v, parent_[v]);
    if (!l) throw BadParams("tree uses missing link " + std::to_string(v) + "->" +
                            std::to_string(parent_[v]));
    parent_link_[v] = *l;
    links_.push_back(*l);
    children_[parent_[v]].push_back(v);
  }
  for (NodeId v = 0; v < n; ++v) {
    NodeId cur = v;
    int steps = 0;
    while (cur != aggregator_) {
      cur = parent_[cur];
      if (++steps >= n) throw BadParams("parent map contains a cycle");
    }
  }
  sorted_links_ = links_;
  std::sort(sorted_links_.begin(), sorted_links_.end());
}

bool AggregationTree::contains(LinkIndex l) const {
  return std::binary_search(sorted_links_.begin(), sorted_links_.end(), l);
}

std::vector<AggregationTree> enumerate_aggregation_trees(const NetworkGraph& g, std::size_t limit) {
  if (limit == 0) throw BadParams("tree limit must be positive");
  const int n = g.node_count();
  const NodeId a = g.aggregator();
  const std::vector<NodeId> order = g.sensors();
  std::vector<NodeId> parent(n, -1);
  std::vector<AggregationTree> out;

  // Assigning parent p to v closes a cycle iff following assigned parents from p reaches v.
  auto closes_cycle = [&](NodeId v, NodeId p) {
    NodeId cur = p;
    while (cur != a && cur != -1) {
      if (cur == v) return true;
      cur = parent[cur];
    }
    return false;
  };

  std::vector<std::size_t> choice(order.size(), 0);
  std::size_t depth = 0;
  while (true) {
    if (depth == order.size()) {
      if (out.size() >= limit) throw TooManyTrees(limit);
      out.emplace_back(g, parent);
      if (depth == 0) break;
      --depth;
      parent[order[depth]] = -1;
      ++choice[depth];
      continue;
    }
    const NodeId v = order[depth];
    const auto outs = g.out_neighbors(v);
    bool placed = false;
    while (choice[depth] < outs.size()) {
      const NodeId p = outs[choice[depth]];
      if (!closes_cycle(v, p)) {
        parent[v] = p;
        placed = true;
        break;
      }
      ++choice[depth];
    }
    if (placed) {
      ++depth;
      if (depth < order.size()) choice[depth] = 0;
      continue;
    }
    // Exhausted this level.
    choice[depth] = 0;
    if (depth == 0) break;
    --depth;
    parent[order[depth]] = -1;
    ++choice[depth];
  }
  return out;
}

TreePacking tree_packing_lp(const NetworkGraph& g, std::span<const double> caps,
                            const std::vector<AggregationTree>& trees) {
  check_caps(g, caps);
  if (trees.empty()) throw BadParams("tree packing needs at least one tree");
  LinearProgram lp;
  for (std::size_t k = 0; k < trees.size(); ++k) lp.add_variable(1.0);
  std::vector<std::vector<std::pair<std::size_t, double>>> per_link(g.link_count());
  for (std::size_t k = 0; k < trees.size(); ++k)
    for (LinkIndex l : trees[k].links()) per_link[l].push_back({k, 1.0});
  for (LinkIndex l = 0; l < g.link_count(); ++l)
    if (!per_link[l].empty()) lp.add_row(std::move(per_link[l]), Relation::less_equal, caps[l]);

  const LpSolution sol = solve_lp(lp);
  TreePacking p;
  p.trees = trees;
  p.weights = sol.x;
  for (double& w : p.weights)
    if (w < 1e-12) w = 0.0;
  p.total = 0.0;
  for (double w : p.weights) p.total += w;
  return p;
}

double packing_min_slack(const NetworkGraph& g, std::span<const double> caps,
                         const std::vector<AggregationTree>& trees, std::span<const double> weights) {
  std::vector<double> load(g.link_count(), 0.0);
  for (std::size_t k = 0; k < trees.size(); ++k)
    for (LinkIndex l : trees[k].links()) load[l] += weights[k];
  double slack = std::numeric_limits<double>::infinity();
  for (LinkIndex l = 0; l < g.link_count(); ++l) slack = std::min(slack, caps[l] - load[l]);
  for (double w : weights) slack = std::min(slack, w);
  return slack;
}

void ScheduleSet::validate(const NetworkGraph& g) const {
  if (schedules.empty()) throw BadParams("schedule set is empty");
  for (const Schedule& s : schedules) {
    if (s.links.size() != s.rates.size()) throw BadParams("schedule links and rates differ in length");
    std::set<LinkIndex> seen;
    for (std::size_t k = 0; k < s.links.size(); ++k) {
      if (s.links[k] >= g.link_count()) throw BadParams("schedule references unknown link");
      if (!(s.rates[k] >= 0.0)) throw BadParams("schedule rate must be nonnegative");
      if (!seen.insert(s.links[k]).second) throw BadParams("schedule lists a link twice");
    }
  }
}

RateVector ScheduleSet::rate_vector(const NetworkGraph& g, std::size_t schedule) const {
  RateVector r(g.link_count(), 0.0);
  const Schedule& s = schedules.at(schedule);
  for (std::size_t k = 0; k < s.links.size(); ++k) r[s.links[k]] = s.rates[k];
  return r;
}

double ScheduleSet::max_rate() const {
  double m = 0.0;
  for (const Schedule& s : schedules)
    for (double r : s.rates) m = std::max(m, r);
  return m;
}

ScheduleSet ScheduleSet::wireline(const NetworkGraph& g) {
  Schedule s;
  for (LinkIndex l = 0; l < g.link_count(); ++l) {
    s.links.push_back(l);
    s.rates.push_back(g.capacity(l));
  }
  return ScheduleSet{{std::move(s)}};
}

SssSolution optimal_sss(const NetworkGraph& g, const ScheduleSet& schedules) {
  schedules.validate(g);
  const std::size_t L = g.link_count();
  const std::vector<NodeId> sensors = g.sensors();

  LinearProgram lp;
  std::vector<std::size_t> pi(schedules.schedules.size());
  for (auto& v : pi) v = lp.add_variable(0.0);
  const std::size_t lambda = lp.add_variable(1.0);
  // flow[k][l]: flow of sensor k's commodity on link l.
  std::vector<std::vector<std::size_t>> flow(sensors.size(), std::vector<std::size_t>(L));
  for (auto& row : flow)
    for (auto& v : row) v = lp.add_variable(0.0);

  {
    std::vector<std::pair<std::size_t, double>> terms;
    for (std::size_t v : pi) terms.push_back({v, 1.0});
    lp.add_row(std::move(terms), Relation::equal, 1.0);
  }
  std::vector<std::vector<std::pair<std::size_t, double>>> supply(L);
  for (std::size_t s = 0; s < schedules.schedules.size(); ++s) {
    const Schedule& sch = schedules.schedules[s];
    for (std::size_t k = 0; k < sch.links.size(); ++k)
      if (sch.rates[k] != 0.0) supply[sch.links[k]].push_back({pi[s], -sch.rates[k]});
  }
  for (std::size_t k = 0; k < sensors.size(); ++k) {
    for (LinkIndex l = 0; l < L; ++l) {
      auto terms = supply[l];
      terms.push_back({flow[k][l], 1.0});
      lp.add_row(std::move(terms), Relation::less_equal, 0.0);
    }
    for (NodeId v = 0; v < g.node_count(); ++v) {
      if (v == g.aggregator()) continue;
      std::vector<std::pair<std::size_t, double>> terms;
      for (LinkIndex l : g.out_links(v)) terms.push_back({flow[k][l], 1.0});
      for (LinkIndex l : g.in_links(v)) terms.push_back({flow[k][l], -1.0});
      if (v == sensors[k]) terms.push_back({lambda, -1.0});
      lp.add_row(std::move(terms), Relation::equal, 0.0);
    }
  }

  const LpSolution sol = solve_lp(lp);
  SssSolution out;
  double total = 0.0;
  for (std::size_t v : pi) {
    out.weights.push_back(std::max(0.0, sol.x[v]));
    total += out.weights.back();
  }
  for (double& w : out.weights) w /= total;
  out.rates.assign(L, 0.0);
  for (std::size_t s = 0; s < schedules.schedules.size(); ++s) {
    const Schedule& sch = schedules.schedules[s];
    for (std::size_t k = 0; k < sch.links.size(); ++k)
      out.rates[sch.links[k]] += out.weights[s] * sch.rates[k];
  }
  out.delta_star = std::max(0.0, sol.x[lambda]);
  return out;
}

double max_refresh_rate(double delta_star_bits, double bits_per_packet) {
  if (!(bits_per_packet > 0.0)) throw BadParams("bits per packet must be positive");
  return delta_star_bits / bits_per_packet;
}

double max_refresh_rate(double delta_star_bits, const FmuxFunction& f) {
  return max_refresh_rate(delta_star_bits, f.bits_per_packet());
}

RateVector packet_rates(std::span<const double> bit_rates, double bits_per_packet) {
  if (!(bits_per_packet > 0.0)) throw BadParams("bits per packet must be positive");
  RateVector r(bit_rates.begin(), bit_rates.end());
  for (double& v : r) v /= bits_per_packet;
  return r;
}

}  // namespace fmuxnet
