#include "fmuxnet/wireline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>

#include "fmuxnet/errors.hpp"

namespace fmuxnet {

namespace {

NodeMask out_mask(const NetworkGraph& g, NodeId n) {
  NodeMask m = 0;
  for (NodeId v : g.out_neighbors(n)) m |= node_bit(v);
  return m;
}

}  // namespace

bool is_valid_footprint(const NetworkGraph& g, NodeMask set) {
  const NodeId a = g.aggregator();
  if (!(set & node_bit(a))) return false;
  NodeMask reached = node_bit(a);
  bool changed = true;
  while (changed) {
    changed = false;
    NodeMask rest = set & ~reached;
    while (rest) {
      const NodeId n = std::countr_zero(rest);
      rest &= rest - 1;
      if (out_mask(g, n) & reached) {
        reached |= node_bit(n);
        changed = true;
      }
    }
  }
  return reached == set;
}

std::vector<NodeMask> valid_footprint_sets(const NetworkGraph& g) {
  if (g.node_count() > kMaxClassNodes)
    throw BadParams("footprint enumeration limited to " + std::to_string(kMaxClassNodes) + " nodes");
  std::vector<NodeMask> out;
  const NodeMask all = (NodeMask{1} << g.node_count()) - 1;
  for (NodeMask s = 1; s <= all; ++s)
    if (is_valid_footprint(g, s)) out.push_back(s);
  return out;
}

NodeMask RoundState::settled(const NetworkGraph& g) const {
  NodeMask s = footprint;
  NodeMask dep = departing;
  while (dep) {
    const NodeId n = std::countr_zero(dep);
    dep &= dep - 1;
    if (contributors[n] == 0) s &= ~node_bit(n);
  }
  for (LinkIndex l : active_links) s |= node_bit(g.link(l).to);
  return s;
}

bool satisfies_local_conditions(const NetworkGraph& g, const RoundState& round, LinkIndex link) {
  const Link& l = g.link(link);
  const NodeId u = l.from;
  const NodeId v = l.to;
  if (u == g.aggregator() || g.capacity(link) <= 0.0) return false;
  const NodeMask fp = round.footprint;
  if (!(fp & node_bit(u)) || !(fp & node_bit(v))) return false;  // aggregation condition
  if (round.departing & node_bit(u)) return false;
  for (NodeId w : g.in_neighbors(u)) {  // non-isolation condition
    // The aggregator is the destination; it cannot be stranded.
    if (w == g.aggregator() || !(fp & node_bit(w))) continue;
    int holders = 0;
    for (NodeId x : g.out_neighbors(w))
      if (fp & node_bit(x)) ++holders;
    if (holders < 2) return false;
  }
  return true;
}

bool is_useful(const NetworkGraph& g, const RoundState& round, LinkIndex link) {
  if (!satisfies_local_conditions(g, round, link)) return false;
  const Link& l = g.link(link);
  const NodeMask after = (round.settled(g) & ~node_bit(l.from)) | node_bit(l.to);
  return is_valid_footprint(g, after);
}

WirelineSimulator::WirelineSimulator(const NetworkGraph& g, const FmuxFunction& f,
                                     WirelineOptions options)
    : g_(g), f_(f), opt_(options), rng_(options.seed) {
  if (g_.node_count() > kMaxWirelineNodes)
    throw BadParams("wireline simulator supports at most 64 nodes");
  if (!opt_.allow_cyclic) topological_order(g_);
  if (!(opt_.lambda >= 0.0)) throw BadParams("lambda must be nonnegative");
  if (!(opt_.sample_every > 0.0)) throw BadParams("sample interval must be positive");
  for (NodeId s : g_.sensors()) sensor_mask_ |= node_bit(s);
  links_.resize(g_.link_count());
  class_mode_ = g_.node_count() <= kMaxClassNodes && !opt_.force_flat_selection;
  if (class_mode_) {
    const std::size_t n_masks = std::size_t{1} << g_.node_count();
    classes_.resize(n_masks);
    class_useful_links_.resize(n_masks);
    link_useful_classes_.resize(g_.link_count());
    idle_useful_.assign(g_.link_count(), 0);
    RoundState probe;
    probe.contributors.assign(g_.node_count(), 1);
    for (NodeMask s : valid_footprint_sets(g_)) {
      probe.footprint = s;
      for (LinkIndex l = 0; l < g_.link_count(); ++l) {
        if (is_useful(g_, probe, l)) {
          class_useful_links_[s].push_back(l);
          link_useful_classes_[l].push_back(s);
        }
      }
    }
  }
}

std::size_t WirelineSimulator::allocate_round() {
  std::size_t h;
  if (!free_.empty()) {
    h = free_.back();
    free_.pop_back();
  } else {
    h = pool_.size();
    pool_.emplace_back();
    pool_live_.push_back(0);
    active_pos_.push_back(SIZE_MAX);
    idle_pos_.push_back(SIZE_MAX);
  }
  pool_live_[h] = 1;
  ++live_rounds_;
  return h;
}

void WirelineSimulator::release_round(std::size_t h) {
  pool_live_[h] = 0;
  RoundState& r = pool_[h];
  handle_by_id_.erase(r.id);
  r.active_links.clear();
  free_.push_back(h);
  --live_rounds_;
}

void WirelineSimulator::enter_idle(std::size_t h) {
  RoundState& r = pool_[h];
  if (class_mode_) {
    auto& bucket = classes_[r.footprint];
    idle_pos_[h] = bucket.size();
    bucket.push_back(h);
    for (LinkIndex l : class_useful_links_[r.footprint]) ++idle_useful_[l];
  } else {
    idle_pos_[h] = flat_idle_.size();
    flat_idle_.push_back(h);
  }
}

void WirelineSimulator::leave_idle(std::size_t h) {
  RoundState& r = pool_[h];
  auto& bucket = class_mode_ ? classes_[r.footprint] : flat_idle_;
  const std::size_t pos = idle_pos_[h];
  const std::size_t last = bucket.back();
  bucket[pos] = last;
  idle_pos_[last] = pos;
  bucket.pop_back();
  idle_pos_[h] = SIZE_MAX;
  if (class_mode_)
    for (LinkIndex l : class_useful_links_[r.footprint]) --idle_useful_[l];
}

bool WirelineSimulator::useful_handle(std::size_t h, LinkIndex link) const {
  return is_useful(g_, pool_[h], link);
}

std::uint64_t WirelineSimulator::useful_idle_count(LinkIndex link) const {
  if (class_mode_) return idle_useful_[link];
  std::uint64_t c = 0;
  for (std::size_t h : flat_idle_)
    if (useful_handle(h, link)) ++c;
  return c;
}

std::uint64_t WirelineSimulator::useful_active_count(LinkIndex link) const {
  std::uint64_t c = 0;
  for (std::size_t h : active_)
    if (useful_handle(h, link)) ++c;
  return c;
}

std::optional<RoundId> WirelineSimulator::select_packet(LinkIndex link) {
  if (links_[link].busy) return std::nullopt;
  const std::uint64_t idle = useful_idle_count(link);
  std::vector<std::size_t> active_useful;
  for (std::size_t h : active_)
    if (useful_handle(h, link)) active_useful.push_back(h);
  const std::uint64_t total = idle + active_useful.size();
  if (total == 0) return std::nullopt;

  std::uint64_t pick = rng_.index(total);
  if (pick >= idle) return pool_[active_useful[pick - idle]].id;

  if (class_mode_) {
    // p_S = X_{S+u} / (X_{+u-v} + X^a_{+u-v})
    for (NodeMask s : link_useful_classes_[link]) {
      const auto& bucket = classes_[s];
      if (pick < bucket.size()) return pool_[bucket[pick]].id;
      pick -= bucket.size();
    }
  } else {
    for (std::size_t h : flat_idle_) {
      if (!useful_handle(h, link)) continue;
      if (pick == 0) return pool_[h].id;
      --pick;
    }
  }
  throw InvariantViolation("useful idle count out of sync with footprint classes");
}

std::size_t WirelineSimulator::handle_of(RoundId id) const {
  auto it = handle_by_id_.find(id);
  if (it == handle_by_id_.end()) throw BadParams("unknown round " + std::to_string(id));
  return it->second;
}

const RoundState* WirelineSimulator::find_round(RoundId id) const {
  auto it = handle_by_id_.find(id);
  return it == handle_by_id_.end() ? nullptr : &pool_[it->second];
}

std::optional<RoundId> WirelineSimulator::link_round(LinkIndex link) const {
  if (!links_[link].busy) return std::nullopt;
  return pool_[links_[link].round].id;
}

std::uint64_t WirelineSimulator::class_count(NodeMask footprint) const {
  if (class_mode_) return footprint < classes_.size() ? classes_[footprint].size() : 0;
  std::uint64_t c = 0;
  for (std::size_t h : flat_idle_)
    if (pool_[h].footprint == footprint) ++c;
  return c;
}

RoundId WirelineSimulator::add_round(std::vector<int> sensed) {
  const auto sensors = g_.sensors();
  if (sensed.size() != sensors.size()) throw BadParams("one sensed value per sensor required");
  const std::size_t h = allocate_round();
  RoundState& r = pool_[h];
  r.id = next_id_++;
  handle_by_id_.emplace(r.id, h);
  last_added_ = h;
  r.arrival_time = now_;
  r.footprint = sensor_mask_ | node_bit(g_.aggregator());
  r.departing = 0;
  r.active_links.clear();
  r.payload.assign(g_.node_count(), f_.identity());
  r.contributors.assign(g_.node_count(), 0);
  for (std::size_t k = 0; k < sensors.size(); ++k) {
    r.payload[sensors[k]] = f_.lift(sensed[k]);
    r.contributors[sensors[k]] = node_bit(sensors[k]);
  }
  r.sensed = std::move(sensed);
  ++metrics_.arrivals;
  enter_idle(h);
  return r.id;
}

void WirelineSimulator::schedule(double time, int kind, LinkIndex link) {
  events_.push(Event{time, seq_++, kind, link});
}

void WirelineSimulator::start_transfer(LinkIndex link, RoundId id) {
  const std::size_t h = handle_of(id);
  RoundState& r = pool_[h];
  if (links_[link].busy) throw BadParams("link is busy");
  if (!useful_handle(h, link)) throw BadParams("packet is not useful on this link");
  const NodeId u = g_.link(link).from;
  if (r.idle()) {
    leave_idle(h);
    active_pos_[h] = active_.size();
    active_.push_back(h);
  }
  LinkState& ls = links_[link];
  ls.busy = true;
  ls.round = h;
  ls.packet = r.payload[u];
  ls.packet_contributors = r.contributors[u];
  r.payload[u] = f_.identity();
  r.contributors[u] = 0;
  r.departing |= node_bit(u);
  r.active_links.push_back(link);
  ++metrics_.transfers;
  schedule(now_ + rng_.exponential(g_.capacity(link)), 1, link);
}

void WirelineSimulator::complete_round(std::size_t h) {
  RoundState& r = pool_[h];
  const NodeId a = g_.aggregator();
  if (r.contributors[a] != sensor_mask_) {
    std::ostringstream msg;
    msg << "round " << r.id << " finished with contributor set " << r.contributors[a]
        << " instead of " << sensor_mask_;
    throw OracleMismatch(msg.str());
  }
  const int got = f_.finalize(r.payload[a]);
  const int want = f_.offline_evaluate(r.sensed);
  ++metrics_.oracle_checks;
  if (got != want) {
    throw OracleMismatch("round " + std::to_string(r.id) + " aggregated to " + std::to_string(got) +
                         ", offline value " + std::to_string(want));
  }
  ++metrics_.completed;
  latency_sum_ += now_ - r.arrival_time;
  release_round(h);
}

bool WirelineSimulator::on_completion(LinkIndex link) {
  LinkState& ls = links_[link];
  if (!ls.busy) throw BadParams("no transfer on link");
  const std::size_t h = ls.round;
  RoundState& r = pool_[h];
  const NodeId u = g_.link(link).from;
  const NodeId v = g_.link(link).to;
  ls.busy = false;

  r.active_links.erase(std::find(r.active_links.begin(), r.active_links.end(), link));
  r.departing &= ~node_bit(u);
  if (r.contributors[u] == 0 && u != g_.aggregator()) r.footprint &= ~node_bit(u);

  const bool v_held = (r.footprint & node_bit(v)) && !(r.departing & node_bit(v));
  if (!v_held) ++metrics_.reestablished;
  if (r.contributors[v] & ls.packet_contributors)
    throw OracleMismatch("round " + std::to_string(r.id) + " merged a contribution twice");
  r.payload[v] = f_.combine(r.payload[v], ls.packet);
  r.contributors[v] |= ls.packet_contributors;
  r.footprint |= node_bit(v);

  if (r.idle()) {
    const std::size_t pos = active_pos_[h];
    const std::size_t last = active_.back();
    active_[pos] = last;
    active_pos_[last] = pos;
    active_.pop_back();
    active_pos_[h] = SIZE_MAX;
    if (r.footprint == node_bit(g_.aggregator())) {
      complete_round(h);
      return true;
    }
    if (opt_.check_invariants && !is_valid_footprint(g_, r.footprint))
      throw InvariantViolation("round " + std::to_string(r.id) + " left an invalid footprint");
    enter_idle(h);
  }
  return false;
}

void WirelineSimulator::fill_idle_links() {
  for (LinkIndex l = 0; l < g_.link_count(); ++l) {
    if (links_[l].busy) continue;
    if (auto pick = select_packet(l)) start_transfer(l, *pick);
  }
}

void WirelineSimulator::refill_after(std::size_t h, std::optional<LinkIndex> freed) {
  // Before the event every idle link had nothing useful; only round h changed
  // and at most one link was freed.
  if (freed) {
    if (auto pick = select_packet(*freed)) start_transfer(*freed, *pick);
  }
  if (!pool_live_[h]) return;
  for (LinkIndex l = 0; l < g_.link_count(); ++l) {
    if (links_[l].busy || !pool_live_[h]) continue;
    if (!useful_handle(h, l)) continue;
    if (auto pick = select_packet(l)) start_transfer(l, *pick);
  }
}

void WirelineSimulator::record_sample(double time) {
  WirelineSample s;
  s.time = time;
  s.in_flight = live_rounds_;
  s.completed = metrics_.completed;
  s.mean_latency = metrics_.completed ? latency_sum_ / static_cast<double>(metrics_.completed) : 0.0;
  metrics_.samples.push_back(s);
  if (opt_.record_classes && class_mode_) {
    ClassSnapshot snap;
    snap.time = time;
    for (NodeMask m = 0; m < classes_.size(); ++m)
      if (!classes_[m].empty()) snap.counts.push_back({m, classes_[m].size()});
    metrics_.class_samples.push_back(std::move(snap));
  }
}

TraceMetrics WirelineSimulator::run() {
  const auto sensors = g_.sensors();
  if (opt_.lambda > 0.0) schedule(now_ + rng_.exponential(opt_.lambda), 0, 0);
  next_sample_ = 0.0;

  while (true) {
    const double t = events_.empty() ? std::numeric_limits<double>::infinity() : events_.top().time;
    while (next_sample_ <= opt_.horizon && next_sample_ <= t) {
      record_sample(next_sample_);
      next_sample_ += opt_.sample_every;
    }
    if (t > opt_.horizon) break;
    const Event ev = events_.top();
    events_.pop();
    now_ = ev.time;
    ++metrics_.events;
    if (ev.kind == 0) {
      std::vector<int> sensed(sensors.size());
      for (int& x : sensed) x = static_cast<int>(rng_.index(static_cast<std::uint64_t>(f_.alphabet_size())));
      add_round(std::move(sensed));
      refill_after(last_added_, std::nullopt);
      schedule(now_ + rng_.exponential(opt_.lambda), 0, 0);
    } else {
      const std::size_t h = links_[ev.link].round;
      on_completion(ev.link);
      refill_after(h, ev.link);
    }
    if (opt_.check_invariants) {
      check_invariants();
      ++metrics_.invariant_checks;
    }
  }
  metrics_.mean_latency =
      metrics_.completed ? latency_sum_ / static_cast<double>(metrics_.completed) : 0.0;
  return metrics_;
}

void WirelineSimulator::check_invariants() const {
  for (LinkIndex l = 0; l < g_.link_count(); ++l) {
    if (links_[l].busy) continue;
    if (useful_idle_count(l) + useful_active_count(l) != 0)
      throw InvariantViolation("activity condition broken on idle link " + std::to_string(l));
  }
  for (std::size_t h = 0; h < pool_.size(); ++h) {
    if (!pool_live_[h]) continue;
    const RoundState& r = pool_[h];
    if (!is_valid_footprint(g_, r.settled(g_)))
      throw InvariantViolation("round " + std::to_string(r.id) + " has an invalid settled footprint");
    if (r.idle() && !is_valid_footprint(g_, r.footprint))
      throw InvariantViolation("idle round " + std::to_string(r.id) + " has an invalid footprint");
    NodeMask seen = 0;
    auto add = [&](NodeMask m) {
      if (seen & m) throw InvariantViolation("round " + std::to_string(r.id) + " duplicated a contribution");
      seen |= m;
    };
    for (NodeId n = 0; n < g_.node_count(); ++n) {
      if (r.contributors[n] && !(r.footprint & node_bit(n)))
        throw InvariantViolation("payload held outside the footprint");
      add(r.contributors[n]);
    }
    for (LinkIndex l : r.active_links) add(links_[l].packet_contributors);
    if (seen != sensor_mask_)
      throw InvariantViolation("round " + std::to_string(r.id) + " lost a contribution");
    std::uint64_t senders = 0;
    for (LinkIndex l : r.active_links) {
      const NodeMask b = node_bit(g_.link(l).from);
      if (senders & b) throw InvariantViolation("two transmissions from one node for one round");
      senders |= b;
    }
    if (senders != r.departing) throw InvariantViolation("departing set out of sync");
  }
}

std::vector<double> counting_weights(int count, double alpha) {
  std::vector<double> beta(static_cast<std::size_t>(count) + 1, 0.0);
  for (int i = 1; i <= count; ++i) beta[i] = std::pow(1.0 + 1.0 / alpha, i - 1);
  return beta;
}

namespace {

struct LemmaContext {
  std::vector<NodeMask> sets;
  std::vector<double> value_by_mask;  // x_S, zero off the valid collection
  std::vector<char> valid_by_mask;
};

double not_contained(const LemmaContext& c, NodeMask s) {
  double sum = 0.0;
  for (std::size_t k = 0; k < c.sets.size(); ++k)
    if ((c.sets[k] & ~s) != 0) sum += c.value_by_mask[c.sets[k]];
  return sum;
}

// x_{+u-v}: rounds whose footprint is S'+u for a valid S' containing v but not u.
double across(const LemmaContext& c, NodeId u, NodeId v) {
  double sum = 0.0;
  for (NodeMask s : c.sets) {
    if (!(s & node_bit(v)) || (s & node_bit(u))) continue;
    sum += c.value_by_mask[s | node_bit(u)];
  }
  return sum;
}

LemmaContext make_context(const NetworkGraph& g, std::span<const double> x) {
  LemmaContext c;
  c.sets = valid_footprint_sets(g);
  if (x.size() != c.sets.size()) throw BadParams("counter vector must have one entry per valid footprint set");
  const std::size_t n_masks = std::size_t{1} << g.node_count();
  c.value_by_mask.assign(n_masks, 0.0);
  c.valid_by_mask.assign(n_masks, 0);
  for (std::size_t k = 0; k < c.sets.size(); ++k) {
    if (!(x[k] >= 0.0)) throw BadParams("counters must be nonnegative");
    c.value_by_mask[c.sets[k]] = x[k];
    c.valid_by_mask[c.sets[k]] = 1;
  }
  return c;
}

}  // namespace

CountingLemmaResult verify_counting_lemma(const NetworkGraph& g, std::span<const double> x,
                                          double alpha, std::span<const double> beta_override) {
  if (!(alpha > 0.0)) throw BadParams("alpha must be positive");
  const LemmaContext c = make_context(g, x);
  const int n = g.node_count();
  std::vector<double> beta = counting_weights(n, alpha);
  if (!beta_override.empty()) {
    if (beta_override.size() != static_cast<std::size_t>(n))
      throw BadParams("beta override needs one entry per set size");
    for (int i = 1; i <= n; ++i) beta[i] = beta_override[i - 1];
  }
  const double shrink = 1.0 / (1.0 + alpha);
  auto size = [](NodeMask m) { return std::popcount(m); };

  for (NodeMask s : c.sets) {
    const double outside = not_contained(c, s);
    bool all_pairs_loaded = true;
    for (const Link& l : g.links()) {
      const NodeId u = l.from;
      const NodeId v = l.to;
      if (!(s & node_bit(v)) || (s & node_bit(u))) continue;
      const double flow = across(c, u, v);
      if (flow < shrink * outside) {
        all_pairs_loaded = false;
        const NodeMask grown = s | node_bit(u);
        if (!(beta[size(grown)] * not_contained(c, grown) > beta[size(s)] * outside))
          return {false, 1, s, u, v, 0};
      }
    }
    if (!all_pairs_loaded) continue;
    for (const Link& l : g.links()) {
      const NodeId u = l.from;
      const NodeId v = l.to;
      if (!(s & node_bit(v)) || (s & node_bit(u))) continue;
      const double flow = across(c, u, v);
      for (NodeMask other : c.sets) {
        if ((other & ~s) == 0) continue;
        if (!(other & node_bit(v)) || (other & node_bit(u))) continue;
        if (!(c.value_by_mask[other | node_bit(u)] > alpha * flow)) continue;
        const NodeMask uni = s | other;
        if (!(beta[size(uni)] * not_contained(c, uni) > beta[size(s)] * outside))
          return {false, 2, s, u, v, other};
      }
    }
  }
  return {};
}

double fluid_lyapunov(const NetworkGraph& g, std::span<const double> x, double alpha) {
  if (!(alpha > 0.0)) throw BadParams("alpha must be positive");
  const LemmaContext c = make_context(g, x);
  const std::vector<double> beta = counting_weights(g.node_count(), alpha);
  double best = 0.0;
  for (NodeMask s : c.sets) best = std::max(best, beta[std::popcount(s)] * not_contained(c, s));
  return best;
}

}  // namespace fmuxnet
