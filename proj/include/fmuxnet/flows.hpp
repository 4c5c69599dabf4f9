#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fmuxnet/graph.hpp"

namespace fmuxnet {

class FmuxFunction;

// Per-link rates, indexed by link index of the owning graph.
using RateVector = std::vector<double>;

struct MaxFlowResult {
  double value = 0.0;
  std::vector<NodeId> source_side;  // ascending; contains s, excludes t
};

// Dinic's algorithm on the given rates. The returned cut is the residual-reachable
// set of s, so its capacity equals the flow value.
MaxFlowResult max_flow(const NetworkGraph& g, std::span<const double> caps, NodeId s, NodeId t);

struct MinMincut {
  double value = 0.0;
  NodeId argmin = -1;  // smallest id among minimizers
};

// min over sensors i of the i -> aggregator min cut.
MinMincut min_mincut(const NetworkGraph& g, std::span<const double> caps);

// Spanning arborescence oriented toward the aggregator, stored as a parent map.
class AggregationTree {
 public:
  // Throws BadParams when the map does not describe a spanning in-tree of g.
  AggregationTree(const NetworkGraph& g, std::vector<NodeId> parent);

  NodeId parent(NodeId n) const { return parent_[n]; }
  const std::vector<NodeId>& parents() const { return parent_; }
  // Link index of (n, parent(n)); undefined for the aggregator.
  LinkIndex parent_link(NodeId n) const { return parent_link_[n]; }
  // Tree links ordered by child id.
  const std::vector<LinkIndex>& links() const { return links_; }
  const std::vector<NodeId>& children(NodeId n) const { return children_[n]; }
  bool contains(LinkIndex l) const;
  bool is_leaf(NodeId n) const { return children_[n].empty(); }
  NodeId aggregator() const { return aggregator_; }

  bool operator==(const AggregationTree& o) const { return parent_ == o.parent_; }

 private:
  NodeId aggregator_ = 0;
  std::vector<NodeId> parent_;
  std::vector<LinkIndex> parent_link_;
  std::vector<LinkIndex> links_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<LinkIndex> sorted_links_;
};

inline constexpr std::size_t kDefaultTreeLimit = 100000;

// All aggregation trees of g, in lexicographic order of the parent vector.
// Throws TooManyTrees when the count would exceed limit.
std::vector<AggregationTree> enumerate_aggregation_trees(const NetworkGraph& g,
                                                         std::size_t limit = kDefaultTreeLimit);

struct TreePacking {
  std::vector<AggregationTree> trees;
  std::vector<double> weights;
  double total = 0.0;
};

// Maximize the total tree weight subject to per-link capacity.
TreePacking tree_packing_lp(const NetworkGraph& g, std::span<const double> caps,
                            const std::vector<AggregationTree>& trees);

// Smallest slack over all link constraints (negative means infeasible).
double packing_min_slack(const NetworkGraph& g, std::span<const double> caps,
                         const std::vector<AggregationTree>& trees,
                         std::span<const double> weights);

struct Schedule {
  std::vector<LinkIndex> links;
  std::vector<double> rates;  // parallel to links
};

// Admissible schedules. Positive rate is allowed only on listed links.
struct ScheduleSet {
  std::vector<Schedule> schedules;

  // Throws BadParams on an unknown link, negative rate, or duplicate link.
  void validate(const NetworkGraph& g) const;
  RateVector rate_vector(const NetworkGraph& g, std::size_t schedule) const;
  double max_rate() const;
  // One schedule containing every link at its capacity (the wireline case).
  static ScheduleSet wireline(const NetworkGraph& g);
};

struct SssSolution {
  std::vector<double> weights;  // probability per schedule
  RateVector rates;             // induced time-average rate vector
  double delta_star = 0.0;      // max over the convex hull of the min-mincut
};

// Joint LP over schedule weights and one independent flow per sensor.
SssSolution optimal_sss(const NetworkGraph& g, const ScheduleSet& schedules);

// Rounds per time unit supported by a bits-denominated min-mincut.
double max_refresh_rate(double delta_star_bits, const FmuxFunction& f);
double max_refresh_rate(double delta_star_bits, double bits_per_packet);

// Bits-denominated rates to packets per time unit.
RateVector packet_rates(std::span<const double> bit_rates, double bits_per_packet);

}  // namespace fmuxnet
