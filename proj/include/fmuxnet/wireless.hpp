#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fmuxnet/flows.hpp"
#include "fmuxnet/fmux_function.hpp"
#include "fmuxnet/graph.hpp"
#include "fmuxnet/rng.hpp"

namespace fmuxnet {

enum class ArrivalLaw { poisson, bernoulli_batch, deterministic };

// Synchronous per-slot round arrivals, i.i.d. across slots.
struct ArrivalProcess {
  ArrivalLaw law = ArrivalLaw::poisson;
  double mean = 0.0;  // lambda, rounds per slot
  int batch = 1;      // bernoulli_batch: `batch` rounds with probability mean / batch

  std::uint64_t sample(Rng& rng, std::uint64_t slot) const;
  double second_moment() const;
};

ArrivalLaw parse_arrival_law(const std::string& name);

enum class RoutingPolicy { greedy_tree_loading, fixed_split, single_tree };
enum class SchedulingPolicy { maxweight, static_sss };

struct PolicyConfig {
  RoutingPolicy routing = RoutingPolicy::greedy_tree_loading;
  SchedulingPolicy scheduling = SchedulingPolicy::maxweight;
  std::vector<double> split_weights;     // fixed_split: per-tree probabilities
  std::vector<double> schedule_weights;  // static_sss: pi over the schedule set
};

struct WirelessOptions {
  ArrivalProcess arrivals;
  std::uint64_t seed = 1;
  std::uint64_t horizon = 1000;  // slots
  std::uint64_t sample_every = 100;
  bool check_invariants = false;
};

struct WirelessSample {
  std::uint64_t slot = 0;
  std::uint64_t total_useful = 0;
  std::uint64_t total_nonuseful = 0;
  double lyapunov = 0.0;
  std::uint64_t completed = 0;
  std::uint64_t in_flight = 0;
  double mean_latency = 0.0;
  std::vector<double> tree_load;  // rounds assigned per slot so far, per tree
};

struct WirelessMetrics {
  std::vector<WirelessSample> samples;
  std::uint64_t arrivals = 0;
  std::uint64_t completed = 0;
  std::uint64_t transmissions = 0;
  std::uint64_t oracle_checks = 0;
  std::uint64_t type_at_checks = 0;
  std::uint64_t conservation_checks = 0;
  std::vector<std::uint64_t> schedule_counts;
  std::vector<std::uint64_t> tree_assignments;
  double mean_latency = 0.0;
};

// Index of the smallest / largest entry, ties broken uniformly at random.
std::size_t argmin_uniform(std::span<const double> values, Rng& rng);
std::size_t argmax_uniform(std::span<const double> values, Rng& rng);

struct ScheduleDecision {
  std::size_t schedule = 0;
  double weight = 0.0;
  // Per link: tree whose useful queue the link serves (SIZE_MAX for none).
  std::vector<std::size_t> tree_for_link;
};

// Slotted simulator of aggregation-tree routing with Type-AT queues. Each node
// keeps, per tree, a useful queue (ready for the parent) and a count of rounds
// still waiting on children.
class WirelessSimulator {
 public:
  // `schedules` must carry integer packet rates. Throws MultiTreeConfig for a
  // single-tree policy with more than one tree.
  WirelessSimulator(const NetworkGraph& g, ScheduleSet schedules,
                    std::vector<AggregationTree> trees, const FmuxFunction& f, PolicyConfig policy,
                    WirelessOptions options);

  WirelessMetrics run();
  void step();

  // Places `count` new rounds on `tree` (arrival step) and returns their ids.
  std::vector<std::uint64_t> inject_rounds(std::uint64_t count, std::size_t tree);
  // Greedy tree-loading: argmin over trees of the summed useful queues.
  std::size_t greedy_tree_load();
  ScheduleDecision maxweight_schedule();
  ScheduleDecision static_sss_schedule();
  // Single-tree backpressure; throws MultiTreeConfig unless exactly one tree.
  ScheduleDecision single_tree_backpressure();
  // Transmissions on the chosen schedule, then internal transfers and completions.
  void slot_update(const ScheduleDecision& decision);

  double lyapunov_value() const;
  double link_weight(LinkIndex link) const;  // P_ij
  double schedule_weight(std::size_t schedule) const;
  std::uint64_t useful_queue(NodeId n, std::size_t tree) const;
  std::uint64_t waiting_queue(NodeId n, std::size_t tree) const;
  std::uint64_t tree_weight(std::size_t tree) const { return tree_useful_[tree]; }
  std::uint64_t rounds_in_flight() const { return live_; }
  std::uint64_t slot() const { return slot_; }
  const WirelessMetrics& metrics() const { return metrics_; }
  const std::vector<AggregationTree>& trees() const { return trees_; }
  const ScheduleSet& schedules() const { return schedules_; }

 private:
  enum class NodeStage : std::uint8_t { waiting, useful, sent };

  struct Round {
    std::uint64_t id = 0;
    std::size_t tree = 0;
    std::uint64_t arrival_slot = 0;
    std::vector<int> sensed;
    std::vector<Payload> payload;
    std::vector<std::uint64_t> contributors;
    std::vector<std::uint16_t> delivered;
    std::vector<NodeStage> stage;
    std::uint64_t sent_mask = 0;
    int crossings = 0;
  };

  std::size_t qindex(NodeId n, std::size_t tree) const {
    return static_cast<std::size_t>(n) * trees_.size() + tree;
  }
  void push_useful(NodeId n, std::size_t tree, std::size_t handle);
  void transmit(LinkIndex link, std::size_t tree, std::uint64_t count,
                std::vector<std::pair<NodeId, std::size_t>>& touched);
  void complete(std::size_t handle);
  void record_sample();

  NetworkGraph g_;
  ScheduleSet schedules_;
  std::vector<AggregationTree> trees_;
  FmuxFunction f_;
  PolicyConfig policy_;
  WirelessOptions opt_;
  Rng rng_;
  std::uint64_t sensor_mask_ = 0;
  std::vector<NodeId> sensors_;

  std::vector<std::vector<std::size_t>> trees_of_link_;
  std::vector<std::vector<std::size_t>> rates_;  // integer rates, per schedule per link
  std::vector<std::deque<std::size_t>> useful_;  // by qindex, handles in round-id order
  std::vector<std::uint64_t> waiting_;           // by qindex
  std::vector<std::uint64_t> tree_useful_;       // W_tau
  std::vector<double> schedule_cdf_;
  std::vector<double> split_cdf_;

  std::vector<Round> pool_;
  std::vector<std::size_t> free_;
  std::uint64_t next_id_ = 0;
  std::uint64_t live_ = 0;
  std::uint64_t slot_ = 0;
  double latency_sum_ = 0.0;
  WirelessMetrics metrics_;
};

// Static randomized policy from the optimal service split and a tree packing of
// its induced rates. Trees with zero weight are dropped.
struct StaticSssPlan {
  SssSolution split;
  TreePacking packing;
  PolicyConfig policy;
  std::vector<AggregationTree> trees;
};

StaticSssPlan static_sss_policy(const NetworkGraph& g, const ScheduleSet& schedules,
                                std::size_t tree_limit = kDefaultTreeLimit);
// Same, packing only over the given candidate trees.
StaticSssPlan static_sss_policy(const NetworkGraph& g, const ScheduleSet& schedules,
                                const std::vector<AggregationTree>& candidates);

// Converts bits-per-slot schedule rates to whole packets per slot. Returns the
// number of rates that were rounded down.
std::size_t floor_packet_schedules(ScheduleSet& schedules, double bits_per_packet);

}  // namespace fmuxnet
