#include "fmuxnet/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

#include "fmuxnet/errors.hpp"

namespace fmuxnet {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BadParams("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw BadParams(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw BadParams("cannot write " + path);
  out << doc.dump(2) << '\n';
}

namespace {

template <class T>
T field(const json& doc, const char* key) {
  if (!doc.contains(key)) throw BadParams(std::string("missing field \"") + key + "\"");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw BadParams(std::string("field \"") + key + "\": " + e.what());
  }
}

LinkIndex require_link(const NetworkGraph& g, NodeId u, NodeId v) {
  auto l = g.find_link(u, v);
  if (!l) throw BadParams("no link " + std::to_string(u) + "->" + std::to_string(v));
  return *l;
}

}  // namespace

NetworkGraph graph_from_json(const json& doc) {
  const int n = field<int>(doc, "nodes");
  const int a = field<int>(doc, "aggregator");
  const json& ls = doc.at("links");
  if (!ls.is_array()) throw BadParams("\"links\" must be an array");
  std::vector<Link> links;
  std::vector<double> caps;
  for (const auto& e : ls) {
    links.push_back({field<int>(e, "from"), field<int>(e, "to")});
    caps.push_back(e.contains("capacity") ? field<double>(e, "capacity") : 1.0);
  }
  return NetworkGraph::build(n, a, std::move(links), std::move(caps));
}

json graph_to_json(const NetworkGraph& g) {
  json links = json::array();
  for (LinkIndex l = 0; l < g.link_count(); ++l)
    links.push_back({{"from", g.link(l).from}, {"to", g.link(l).to}, {"capacity", g.capacity(l)}});
  return {{"nodes", g.node_count()}, {"aggregator", g.aggregator()}, {"links", links}};
}

ScheduleSet schedules_from_json(const NetworkGraph& g, const json& doc) {
  const json& arr = doc.is_array() ? doc : doc.at("schedules");
  ScheduleSet set;
  for (const auto& s : arr) {
    Schedule sch;
    for (const auto& pair : s.at("links")) {
      if (!pair.is_array() || pair.size() != 2) throw BadParams("schedule link must be [u, v]");
      sch.links.push_back(require_link(g, pair[0].get<int>(), pair[1].get<int>()));
    }
    if (s.contains("rates")) {
      sch.rates = s.at("rates").get<std::vector<double>>();
    } else {
      for (LinkIndex l : sch.links) sch.rates.push_back(g.capacity(l));
    }
    if (sch.rates.size() != sch.links.size()) throw BadParams("schedule rates/links length mismatch");
    set.schedules.push_back(std::move(sch));
  }
  set.validate(g);
  return set;
}

json schedules_to_json(const NetworkGraph& g, const ScheduleSet& s) {
  json arr = json::array();
  for (const auto& sch : s.schedules) {
    json links = json::array();
    for (LinkIndex l : sch.links) links.push_back({g.link(l).from, g.link(l).to});
    arr.push_back({{"links", links}, {"rates", sch.rates}});
  }
  return {{"schedules", arr}};
}

WeightedTrees trees_from_json(const NetworkGraph& g, const json& doc) {
  const json& arr = doc.is_array() ? doc : doc.at("trees");
  WeightedTrees out;
  bool any_weight = false;
  for (const auto& t : arr) {
    const json& p = t.is_object() && t.contains("parents") ? t.at("parents") : t;
    std::vector<NodeId> parent(static_cast<std::size_t>(g.node_count()), -1);
    if (p.is_array()) {
      parent = p.get<std::vector<NodeId>>();
    } else if (p.is_object()) {
      for (const auto& [k, v] : p.items()) {
        int child = -1;
        auto [ptr, ec] = std::from_chars(k.data(), k.data() + k.size(), child);
        if (ec != std::errc() || ptr != k.data() + k.size() || child < 0 || child >= g.node_count())
          throw BadParams("bad node id in tree: " + k);
        parent[static_cast<std::size_t>(child)] = v.get<int>();
      }
    } else {
      throw BadParams("tree must be a parent map or parent vector");
    }
    out.trees.emplace_back(g, std::move(parent));
    double w = 1.0;
    if (t.is_object() && t.contains("weight")) {
      w = t.at("weight").get<double>();
      any_weight = true;
    }
    out.weights.push_back(w);
  }
  if (!any_weight) out.weights.clear();
  return out;
}

json tree_to_json(const AggregationTree& t) {
  json p = json::object();
  for (std::size_t n = 0; n < t.parents().size(); ++n)
    if (static_cast<NodeId>(n) != t.aggregator()) p[std::to_string(n)] = t.parents()[n];
  return p;
}

FunctionSpec function_from_json(const json& doc) {
  if (doc.is_string()) return parse_function_spec(doc.get<std::string>(), 2, 16);
  const auto name = field<std::string>(doc, "name");
  const int k = doc.contains("k") ? field<int>(doc, "k") : 2;
  const int alpha = doc.contains("alphabet_size") ? field<int>(doc, "alphabet_size") : 16;
  FunctionSpec spec = parse_function_spec(name, k, alpha);
  if (doc.contains("log2_range")) spec.log2_range_override = field<double>(doc, "log2_range");
  return spec;
}

json function_to_json(const FunctionSpec& spec) {
  json j = {{"name", function_name(spec.kind)}, {"alphabet_size", spec.alphabet_size}};
  if (spec.kind == FunctionKind::kth) j["k"] = spec.k;
  return j;
}

Analysis analyze(const NetworkGraph& g, const ScheduleSet* schedules,
                 const std::vector<AggregationTree>& trees, const FmuxFunction& f,
                 const std::string& rate_units) {
  if (rate_units != "packets" && rate_units != "bits")
    throw BadParams("rate_units must be packets or bits");
  Analysis a;
  RateVector rates(g.capacities().begin(), g.capacities().end());
  if (schedules) {
    SssSolution sss = optimal_sss(g, *schedules);
    rates = sss.rates;
    a.schedule_weights = sss.weights;
  }
  a.cut = min_mincut(g, rates);
  a.packing = tree_packing_lp(g, rates, trees);
  a.lambda_star = rate_units == "bits" ? max_refresh_rate(a.cut.value, f) : a.cut.value;
  return a;
}

json analysis_to_json(const Analysis& a) {
  json packing = json::array();
  for (std::size_t t = 0; t < a.packing.trees.size(); ++t) {
    if (a.packing.weights[t] <= 0.0) continue;
    packing.push_back({{"parents", tree_to_json(a.packing.trees[t])}, {"weight", a.packing.weights[t]}});
  }
  json out = {{"delta_star", a.cut.value},
              {"lambda_star", a.lambda_star},
              {"argmin_node", a.cut.argmin},
              {"packing", packing}};
  if (!a.schedule_weights.empty()) out["schedule_weights"] = a.schedule_weights;
  return out;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 10);
  return ec == std::errc() ? std::string(buf, ptr) : std::to_string(v);
}

void write_wireline_csv(std::ostream& os, const TraceMetrics& m) {
  os << "time,rounds_in_flight,completed,mean_latency\n";
  for (const auto& s : m.samples)
    os << format_number(s.time) << ',' << s.in_flight << ',' << s.completed << ','
       << format_number(s.mean_latency) << '\n';
}

void write_wireless_csv(std::ostream& os, const WirelessMetrics& m, std::size_t tree_count) {
  os << "slot,total_useful,total_nonuseful,V,completed,mean_latency,in_flight";
  for (std::size_t t = 0; t < tree_count; ++t) os << ",load_tree_" << t;
  os << '\n';
  for (const auto& s : m.samples) {
    os << s.slot << ',' << s.total_useful << ',' << s.total_nonuseful << ','
       << format_number(s.lyapunov) << ',' << s.completed << ',' << format_number(s.mean_latency)
       << ',' << s.in_flight;
    for (double x : s.tree_load) os << ',' << format_number(x);
    os << '\n';
  }
}

}  // namespace fmuxnet
