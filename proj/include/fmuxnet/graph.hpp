#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fmuxnet {

using NodeId = int;
using LinkIndex = std::size_t;

struct Link {
  NodeId from = 0;
  NodeId to = 0;
  auto operator<=>(const Link&) const = default;
};

// Directed communication graph with a distinguished aggregator. Nodes are the
// dense ids 0..node_count()-1. Immutable once built.
class NetworkGraph {
 public:
  // Validates and builds. Throws SelfLoop, DuplicateLink, NegativeCapacity,
  // UnreachableAggregator (smallest offending node), or GraphError for
  // malformed sizes.
  static NetworkGraph build(int node_count, NodeId aggregator, std::vector<Link> links,
                            std::vector<double> capacities);

  int node_count() const { return node_count_; }
  NodeId aggregator() const { return aggregator_; }
  std::size_t link_count() const { return links_.size(); }

  std::span<const Link> links() const { return links_; }
  const Link& link(LinkIndex i) const { return links_[i]; }
  std::span<const double> capacities() const { return capacities_; }
  double capacity(LinkIndex i) const { return capacities_[i]; }

  std::optional<LinkIndex> find_link(NodeId from, NodeId to) const;

  // N^+(i) and N^-(i), sorted by node id.
  std::span<const NodeId> out_neighbors(NodeId n) const { return out_nodes_[n]; }
  std::span<const NodeId> in_neighbors(NodeId n) const { return in_nodes_[n]; }
  // Link indices leaving / entering a node, in the same order as the neighbor lists.
  std::span<const LinkIndex> out_links(NodeId n) const { return out_links_[n]; }
  std::span<const LinkIndex> in_links(NodeId n) const { return in_links_[n]; }

  // Sensor nodes: every node except the aggregator, ascending.
  std::vector<NodeId> sensors() const;

  bool is_acyclic() const;

  // Same topology with a replacement capacity vector (validated).
  NetworkGraph with_capacities(std::vector<double> capacities) const;

 private:
  NetworkGraph() = default;

  int node_count_ = 0;
  NodeId aggregator_ = 0;
  std::vector<Link> links_;
  std::vector<double> capacities_;
  std::vector<std::vector<NodeId>> out_nodes_;
  std::vector<std::vector<NodeId>> in_nodes_;
  std::vector<std::vector<LinkIndex>> out_links_;
  std::vector<std::vector<LinkIndex>> in_links_;
};

// Order with the aggregator first in which every link points from a later node
// to an earlier one. Ties are broken by smallest id. Throws CycleError naming
// one cycle.
std::vector<NodeId> topological_order(const NetworkGraph& g);

enum class GraphKind { complete, grid, line, random_dag };

GraphKind parse_graph_kind(const std::string& name);

struct GenerateParams {
  int nodes = 0;
  double capacity = 1.0;
  std::uint64_t seed = 0;
  // random_dag only: probability of each optional backward link, and an
  // optional integer capacity range (used when max_capacity > 0).
  double edge_probability = 0.5;
  int min_capacity = 0;
  int max_capacity = 0;
};

// complete: every ordered pair, aggregator 0. line: i -> i-1, aggregator 0.
// grid: side x side cells, row-major ids, 4-neighbour links in both
// directions, aggregator at the center cell (cell N/2 for even sides).
// random_dag: node i > 0 links to a uniformly chosen lower node plus each other
// lower node with edge_probability; aggregator 0.
NetworkGraph generate(GraphKind kind, const GenerateParams& params);

}  // namespace fmuxnet
