#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fmuxnet/io.hpp"

namespace fmuxnet {

enum class Model { wireline, wireless };
Model parse_model(const std::string& name);
std::string model_name(Model m);

enum class Verdict { stable, unstable, inconclusive };
std::string verdict_name(Verdict v);

struct StabilityParams {
  std::size_t window_samples = 100;
  double burn_in = 0.2;
  double stable_factor = 0.01;    // eps_s = factor * lambda
  double unstable_factor = 0.05;  // eps_u = factor * lambda
  double cap_factor = 50.0;       // Q_cap = factor * lambda * N
};

struct StabilityVerdict {
  double slope = 0.0;
  double max_queue = 0.0;
  double eps_stable = 0.0;
  double eps_unstable = 0.0;
  double queue_cap = 0.0;
  Verdict verdict = Verdict::inconclusive;
};

// Least-squares slope of window means over the post-burn-in part of a
// total-queue series. Throws SeriesTooShort below 10 windows of samples.
StabilityVerdict detect_stability(std::span<const double> times, std::span<const double> totals,
                                  double lambda, int node_count, const StabilityParams& params = {});

struct ExperimentConfig {
  json graph;  // file path, inline graph document, or {"generate": {...}}
  Model model = Model::wireline;
  std::string policy;  // wireline: random-useful; wireless: greedy-maxweight, static-sss, ...
  FunctionSpec function;
  std::vector<double> lambdas;
  std::vector<std::uint64_t> seeds;
  double horizon = 2e5;
  double sample_every = 10.0;
  StabilityParams stability;
  json schedules;              // null: one schedule with every link at capacity
  json trees = "all";          // "all", a file path, or an inline list
  std::string rate_units = "packets";  // or "bits" (schedule rates divided by log2|R|)
  ArrivalProcess arrivals;
  bool allow_cyclic = false;
  bool check_invariants = false;
  std::string output_dir;
  unsigned threads = 1;

  // Relative file paths inside the document resolve against base_dir.
  static ExperimentConfig from_json(const json& doc, const std::string& base_dir = "");
  json to_json() const;
  void validate() const;
};

// Resolved inputs shared by every point of a sweep.
struct Experiment {
  NetworkGraph graph;
  FmuxFunction function;
  ScheduleSet schedules;
  std::vector<AggregationTree> trees;
  PolicyConfig policy;
  double delta_star = 0.0;
  double lambda_star = 0.0;
  std::size_t floored_rates = 0;
};

NetworkGraph resolve_graph(const json& source, const std::string& base_dir = "");
Experiment prepare_experiment(const ExperimentConfig& config, const std::string& base_dir = "");

struct RunResult {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  StabilityVerdict stability;
  std::uint64_t arrivals = 0;
  std::uint64_t completed = 0;
  std::uint64_t oracle_checks = 0;
  double mean_latency = 0.0;
  std::string csv;       // time series
  std::string csv_path;  // where it was written, if anywhere
};

RunResult run_point(const Experiment& e, const ExperimentConfig& config, double lambda,
                    std::uint64_t seed);
std::string run_file_stem(const ExperimentConfig& config, double lambda, std::uint64_t seed);
json run_summary(const RunResult& r);

struct LambdaSummary {
  double lambda = 0.0;
  Verdict verdict = Verdict::inconclusive;  // stable/unstable only when every seed agrees
  std::size_t stable = 0;
  std::size_t unstable = 0;
  std::size_t inconclusive = 0;
};

struct SweepResult {
  std::vector<RunResult> points;  // ordered by (lambda, seed)
  std::vector<LambdaSummary> per_lambda;
  std::optional<double> lambda_hat;  // largest lambda of the stable prefix
  bool monotone = true;
  bool definitive = false;  // at least 3 seeds
  double delta_star = 0.0;
  double lambda_star = 0.0;
  json summary;
};

SweepResult sweep(const ExperimentConfig& config, const std::string& base_dir = "");

// Aggregates per-point verdicts; exposed for tests.
void summarize_sweep(SweepResult& result, std::size_t seed_count);

struct VerifyOptions {
  std::uint64_t seed = 1;
};

// suite: flows, fmux, wireline, wireless or all. Report has "passed" and a list of checks.
json verify(const std::string& suite, const VerifyOptions& options = {});

}  // namespace fmuxnet
