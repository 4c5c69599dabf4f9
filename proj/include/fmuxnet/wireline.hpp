#pragma once

#include <cstdint>
#include <optional>
#include <queue>
#include <span>
#include <unordered_map>
#include <vector>

#include "fmuxnet/fmux_function.hpp"
#include "fmuxnet/graph.hpp"
#include "fmuxnet/rng.hpp"

namespace fmuxnet {

using NodeMask = std::uint64_t;
using RoundId = std::uint64_t;

inline constexpr int kMaxWirelineNodes = 64;
// Footprint-class counters are materialized up to this many nodes.
inline constexpr int kMaxClassNodes = 12;

inline NodeMask node_bit(NodeId n) { return NodeMask{1} << n; }

// True when every node of `set` has a directed path to the aggregator inside `set`.
bool is_valid_footprint(const NetworkGraph& g, NodeMask set);

// All valid footprint sets (each contains the aggregator), ascending by mask.
// Requires node_count() <= kMaxClassNodes.
std::vector<NodeMask> valid_footprint_sets(const NetworkGraph& g);

// Per-round state of the random useful-packet forwarding scheme.
struct RoundState {
  RoundId id = 0;
  NodeMask footprint = 0;   // nodes holding or sending a packet of the round
  NodeMask departing = 0;   // nodes whose packet is on a link
  std::vector<LinkIndex> active_links;
  std::vector<Payload> payload;        // per node; emptied while departing
  std::vector<NodeMask> contributors;  // sensors folded into payload[n]
  std::vector<int> sensed;             // per sensor, in graph.sensors() order
  double arrival_time = 0.0;

  bool idle() const { return active_links.empty(); }
  // Nodes that will hold the round once every in-flight packet has landed.
  NodeMask settled(const NetworkGraph& g) const;
};

// Local usefulness of a packet of `round` on idle link (u, v): u and v hold the
// round, u is not already sending it, and every in-neighbour of u holding the
// round keeps at least two out-neighbours in the footprint. Links out of the
// aggregator and zero-rate links are never useful.
bool satisfies_local_conditions(const NetworkGraph& g, const RoundState& round, LinkIndex link);

// Local conditions plus the settled-footprint guard: the footprint left once all
// in-flight packets (this one included) land must stay valid.
bool is_useful(const NetworkGraph& g, const RoundState& round, LinkIndex link);

struct WirelineOptions {
  double lambda = 1.0;          // rounds per time unit
  std::uint64_t seed = 1;
  double horizon = 1000.0;
  double sample_every = 10.0;
  bool allow_cyclic = false;
  bool check_invariants = false;
  bool record_classes = false;  // X_S snapshots at each sample (class mode only)
  bool force_flat_selection = false;
};

struct WirelineSample {
  double time = 0.0;
  std::uint64_t in_flight = 0;
  std::uint64_t completed = 0;
  double mean_latency = 0.0;
};

struct ClassSnapshot {
  double time = 0.0;
  std::vector<std::pair<NodeMask, std::uint64_t>> counts;  // nonzero X_S only
};

struct TraceMetrics {
  std::vector<WirelineSample> samples;
  std::vector<ClassSnapshot> class_samples;
  std::uint64_t arrivals = 0;
  std::uint64_t completed = 0;
  std::uint64_t transfers = 0;
  std::uint64_t events = 0;
  std::uint64_t oracle_checks = 0;
  std::uint64_t reestablished = 0;  // packets landing on a node that had already sent its own
  std::uint64_t invariant_checks = 0;
  double mean_latency = 0.0;
};

// Continuous-time simulator: Poisson round arrivals at every node, exponential
// transfer times with the link's packet rate, and random useful-packet
// forwarding on every idle link.
class WirelineSimulator {
 public:
  // g carries packet-denominated rates. Throws CycleError for a cyclic graph
  // unless allow_cyclic is set, and BadParams for more than 64 nodes.
  WirelineSimulator(const NetworkGraph& g, const FmuxFunction& f, WirelineOptions options);

  TraceMetrics run();

  // Step-level interface.
  RoundId add_round(std::vector<int> sensed);
  // Uniform choice among useful packets across the link; nullopt leaves it idle.
  std::optional<RoundId> select_packet(LinkIndex link);
  void start_transfer(LinkIndex link, RoundId round);
  // Completes the transfer on `link`. Returns true when the round finished.
  bool on_completion(LinkIndex link);
  // Runs select/start on every idle link (the activity condition).
  void fill_idle_links();

  // X_{+u-v} and X^a_{+u-v}.
  std::uint64_t useful_idle_count(LinkIndex link) const;
  std::uint64_t useful_active_count(LinkIndex link) const;

  const RoundState* find_round(RoundId id) const;
  bool link_busy(LinkIndex link) const { return links_[link].busy; }
  std::optional<RoundId> link_round(LinkIndex link) const;
  std::uint64_t class_count(NodeMask footprint) const;
  bool class_mode() const { return class_mode_; }
  std::size_t rounds_in_flight() const { return live_rounds_; }
  const TraceMetrics& metrics() const { return metrics_; }

  // Throws InvariantViolation on footprint invalidity, a broken activity
  // condition, or a lost / duplicated contribution.
  void check_invariants() const;

 private:
  struct LinkState {
    bool busy = false;
    std::size_t round = 0;  // pool handle
    Payload packet;
    NodeMask packet_contributors = 0;
  };

  struct Event {
    double time;
    std::uint64_t seq;
    int kind;  // 0 arrival, 1 completion
    LinkIndex link;
    bool operator>(const Event& o) const {
      return time != o.time ? time > o.time : seq > o.seq;
    }
  };

  std::size_t allocate_round();
  void release_round(std::size_t h);
  void enter_idle(std::size_t h);
  void leave_idle(std::size_t h);
  bool useful_handle(std::size_t h, LinkIndex link) const;
  void refill_after(std::size_t h, std::optional<LinkIndex> freed);
  void complete_round(std::size_t h);
  void schedule(double time, int kind, LinkIndex link);
  void record_sample(double time);
  std::size_t handle_of(RoundId id) const;

  NetworkGraph g_;
  FmuxFunction f_;
  WirelineOptions opt_;
  Rng rng_;
  NodeMask sensor_mask_ = 0;
  bool class_mode_ = false;

  std::vector<RoundState> pool_;
  std::vector<char> pool_live_;
  std::vector<std::size_t> free_;
  std::vector<std::size_t> active_;          // handles of active rounds, activation order
  std::vector<std::size_t> active_pos_;      // per handle
  std::vector<std::size_t> idle_pos_;        // per handle, position inside its class or flat list
  std::vector<std::vector<std::size_t>> classes_;  // class mode: handles by footprint mask
  std::vector<std::size_t> flat_idle_;       // flat mode
  std::vector<std::vector<LinkIndex>> class_useful_links_;  // class mode: by mask
  std::vector<std::vector<NodeMask>> link_useful_classes_;  // class mode: by link
  std::vector<std::uint64_t> idle_useful_;   // class mode: X_{+u-v} per link
  std::unordered_map<RoundId, std::size_t> handle_by_id_;
  std::size_t last_added_ = 0;
  std::size_t live_rounds_ = 0;
  RoundId next_id_ = 0;

  std::vector<LinkState> links_;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events_;
  std::uint64_t seq_ = 0;
  double now_ = 0.0;
  double next_sample_ = 0.0;
  double latency_sum_ = 0.0;
  TraceMetrics metrics_;
};

// Lemma check on counters indexed by valid footprint sets (same order as
// valid_footprint_sets). Returns true when neither implication is violated.
struct CountingLemmaResult {
  bool holds = true;
  int violated_condition = 0;  // 1 or 2
  NodeMask set = 0;
  NodeId u = -1;
  NodeId v = -1;
  NodeMask other_set = 0;
};

std::vector<double> counting_weights(int count, double alpha);

CountingLemmaResult verify_counting_lemma(const NetworkGraph& g, std::span<const double> x,
                                          double alpha,
                                          std::span<const double> beta_override = {});

// max over valid S of beta_|S| * (sum of x over valid sets not contained in S).
double fluid_lyapunov(const NetworkGraph& g, std::span<const double> x, double alpha);

}  // namespace fmuxnet
