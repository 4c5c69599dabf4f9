#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "fmuxnet/flows.hpp"
#include "fmuxnet/fmux_function.hpp"
#include "fmuxnet/graph.hpp"
#include "fmuxnet/wireless.hpp"
#include "fmuxnet/wireline.hpp"

namespace fmuxnet {

using json = nlohmann::json;

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& doc);

// {"nodes": N, "aggregator": a, "links": [{"from", "to", "capacity"}]}
NetworkGraph graph_from_json(const json& doc);
json graph_to_json(const NetworkGraph& g);

// {"schedules": [{"links": [[u, v], ...], "rates": [...]}]}. Links must exist in g.
ScheduleSet schedules_from_json(const NetworkGraph& g, const json& doc);
json schedules_to_json(const NetworkGraph& g, const ScheduleSet& s);

// Tree lists: {"trees": [{"parents": {"1": 0, ...}, "weight": w}]} or a bare array.
// "parents" may also be a full parent vector with -1 at the aggregator.
struct WeightedTrees {
  std::vector<AggregationTree> trees;
  std::vector<double> weights;  // empty when no entry carries a weight
};
WeightedTrees trees_from_json(const NetworkGraph& g, const json& doc);
json tree_to_json(const AggregationTree& t);

// {"name": "parity" | "max" | "kth", "k": int, "alphabet_size": int}
FunctionSpec function_from_json(const json& doc);
json function_to_json(const FunctionSpec& spec);

struct Analysis {
  MinMincut cut;
  double lambda_star = 0.0;
  TreePacking packing;
  std::vector<double> schedule_weights;  // set when a schedule set was analyzed
};
// Min-mincut of the capacities, or of the optimal split rates when schedules
// are given, and the tree packing of the same rates. rate_units "bits" divides
// the cut by log2|R(f)| for lambda_star.
Analysis analyze(const NetworkGraph& g, const ScheduleSet* schedules,
                 const std::vector<AggregationTree>& trees, const FmuxFunction& f,
                 const std::string& rate_units = "packets");
json analysis_to_json(const Analysis& a);

std::string format_number(double v);

void write_wireline_csv(std::ostream& os, const TraceMetrics& m);
void write_wireless_csv(std::ostream& os, const WirelessMetrics& m, std::size_t tree_count);

}  // namespace fmuxnet
