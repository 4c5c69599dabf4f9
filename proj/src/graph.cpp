#include "fmuxnet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

#include "fmuxnet/errors.hpp"
#include "fmuxnet/rng.hpp"

namespace fmuxnet {

NetworkGraph NetworkGraph::build(int node_count, NodeId aggregator, std::vector<Link> links,
                                 std::vector<double> capacities) {
  if (node_count < 2) throw GraphError("graph needs at least two nodes");
  if (aggregator < 0 || aggregator >= node_count)
    throw GraphError("aggregator " + std::to_string(aggregator) + " is not a node");
  if (links.empty()) throw GraphError("graph needs at least one link");
  if (links.size() != capacities.size())
    throw GraphError("link and capacity lists differ in length");

  std::set<Link> seen;
  for (std::size_t i = 0; i < links.size(); ++i) {
    const Link& l = links[i];
    if (l.from < 0 || l.from >= node_count || l.to < 0 || l.to >= node_count)
      throw GraphError("link endpoint out of range");
    if (l.from == l.to) throw SelfLoop(l.from);
    if (!seen.insert(l).second) throw DuplicateLink(l.from, l.to);
    if (!(capacities[i] >= 0.0) || !std::isfinite(capacities[i]))
      throw NegativeCapacity(l.from, l.to, capacities[i]);
  }

  NetworkGraph g;
  g.node_count_ = node_count;
  g.aggregator_ = aggregator;
  g.links_ = std::move(links);
  g.capacities_ = std::move(capacities);
  g.out_nodes_.resize(node_count);
  g.in_nodes_.resize(node_count);
  g.out_links_.resize(node_count);
  g.in_links_.resize(node_count);

  std::vector<LinkIndex> order(g.links_.size());
  std::iota(order.begin(), order.end(), LinkIndex{0});
  std::sort(order.begin(), order.end(),
            [&](LinkIndex a, LinkIndex b) { return g.links_[a] < g.links_[b]; });
  for (LinkIndex i : order) {
    g.out_nodes_[g.links_[i].from].push_back(g.links_[i].to);
    g.out_links_[g.links_[i].from].push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](LinkIndex a, LinkIndex b) {
    const Link& x = g.links_[a];
    const Link& y = g.links_[b];
    return std::tie(x.to, x.from) < std::tie(y.to, y.from);
  });
  for (LinkIndex i : order) {
    g.in_nodes_[g.links_[i].to].push_back(g.links_[i].from);
    g.in_links_[g.links_[i].to].push_back(i);
  }

  // Reverse search from the aggregator.
  std::vector<char> reached(node_count, 0);
  std::vector<NodeId> stack{aggregator};
  reached[aggregator] = 1;
  while (!stack.empty()) {
    NodeId n = stack.back();
    stack.pop_back();
    for (NodeId p : g.in_nodes_[n]) {
      if (!reached[p]) {
        reached[p] = 1;
        stack.push_back(p);
      }
    }
  }
  for (NodeId n = 0; n < node_count; ++n)
    if (!reached[n]) throw UnreachableAggregator(n);
  return g;
}

std::optional<LinkIndex> NetworkGraph::find_link(NodeId from, NodeId to) const {
  if (from < 0 || from >= node_count_) return std::nullopt;
  const auto& outs = out_nodes_[from];
  auto it = std::lower_bound(outs.begin(), outs.end(), to);
  if (it == outs.end() || *it != to) return std::nullopt;
  return out_links_[from][static_cast<std::size_t>(it - outs.begin())];
}

std::vector<NodeId> NetworkGraph::sensors() const {
  std::vector<NodeId> s;
  for (NodeId n = 0; n < node_count_; ++n)
    if (n != aggregator_) s.push_back(n);
  return s;
}

bool NetworkGraph::is_acyclic() const {
  try {
    topological_order(*this);
    return true;
  } catch (const CycleError&) {
    return false;
  }
}

NetworkGraph NetworkGraph::with_capacities(std::vector<double> capacities) const {
  return build(node_count_, aggregator_, links_, std::move(capacities));
}

std::vector<NodeId> topological_order(const NetworkGraph& g) {
  const int n = g.node_count();
  std::vector<int> pending_out(n);
  for (NodeId v = 0; v < n; ++v) pending_out[v] = static_cast<int>(g.out_neighbors(v).size());

  std::set<NodeId> ready;
  for (NodeId v = 0; v < n; ++v)
    if (pending_out[v] == 0) ready.insert(v);

  std::vector<NodeId> order;
  std::vector<char> placed(n, 0);
  while (!ready.empty()) {
    NodeId v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(v);
    placed[v] = 1;
    for (NodeId p : g.in_neighbors(v))
      if (--pending_out[p] == 0) ready.insert(p);
  }
  if (static_cast<int>(order.size()) == n) return order;

  // Every unplaced node has an unplaced out-neighbour; walk until a repeat.
  NodeId start = 0;
  while (placed[start]) ++start;
  std::vector<int> position(n, -1);
  std::vector<NodeId> walk;
  NodeId cur = start;
  while (position[cur] < 0) {
    position[cur] = static_cast<int>(walk.size());
    walk.push_back(cur);
    for (NodeId next : g.out_neighbors(cur)) {
      if (!placed[next]) {
        cur = next;
        break;
      }
    }
  }
  std::vector<NodeId> cycle(walk.begin() + position[cur], walk.end());
  throw CycleError(std::move(cycle));
}

GraphKind parse_graph_kind(const std::string& name) {
  if (name == "complete") return GraphKind::complete;
  if (name == "grid") return GraphKind::grid;
  if (name == "line") return GraphKind::line;
  if (name == "random_dag") return GraphKind::random_dag;
  throw BadParams("unknown graph kind '" + name + "'");
}

NetworkGraph generate(GraphKind kind, const GenerateParams& params) {
  const int n = params.nodes;
  if (n < 2) throw BadParams("generator needs at least two nodes");
  if (!(params.capacity >= 0.0)) throw BadParams("capacity must be nonnegative");
  std::vector<Link> links;
  std::vector<double> caps;
  NodeId aggregator = 0;

  switch (kind) {
    case GraphKind::complete:
      for (NodeId u = 0; u < n; ++u)
        for (NodeId v = 0; v < n; ++v)
          if (u != v) links.push_back({u, v});
      caps.assign(links.size(), params.capacity);
      break;
    case GraphKind::line:
      for (NodeId u = 1; u < n; ++u) links.push_back({u, u - 1});
      caps.assign(links.size(), params.capacity);
      break;
    case GraphKind::grid: {
      const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
      if (side * side != n) throw BadParams("grid needs a square node count");
      for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
          const NodeId id = r * side + c;
          const int dr[] = {-1, 0, 0, 1};
          const int dc[] = {0, -1, 1, 0};
          for (int k = 0; k < 4; ++k) {
            const int rr = r + dr[k];
            const int cc = c + dc[k];
            if (rr < 0 || rr >= side || cc < 0 || cc >= side) continue;
            links.push_back({id, rr * side + cc});
          }
        }
      }
      caps.assign(links.size(), params.capacity);
      aggregator = (side % 2 == 1) ? (side / 2) * side + side / 2 : n / 2;
      break;
    }
    case GraphKind::random_dag: {
      if (!(params.edge_probability >= 0.0 && params.edge_probability <= 1.0))
        throw BadParams("edge_probability must lie in [0, 1]");
      if (params.max_capacity > 0 &&
          (params.min_capacity < 0 || params.min_capacity > params.max_capacity))
        throw BadParams("bad capacity range");
      Rng rng(params.seed);
      for (NodeId u = 1; u < n; ++u) {
        const NodeId anchor = static_cast<NodeId>(rng.index(static_cast<std::uint64_t>(u)));
        for (NodeId v = 0; v < u; ++v) {
          if (v == anchor || rng.bernoulli(params.edge_probability)) links.push_back({u, v});
        }
      }
      for (std::size_t i = 0; i < links.size(); ++i) {
        if (params.max_capacity > 0) {
          const auto span = static_cast<std::uint64_t>(params.max_capacity - params.min_capacity + 1);
          caps.push_back(static_cast<double>(params.min_capacity + static_cast<int>(rng.index(span))));
        } else {
          caps.push_back(params.capacity);
        }
      }
      break;
    }
  }
  return NetworkGraph::build(n, aggregator, std::move(links), std::move(caps));
}

}  // namespace fmuxnet
