#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cdqac/instance.hpp"
#include "cdqac/sim.hpp"
#include "cdqac/trainer.hpp"

namespace cdqac {

// Acting wrapper around a bundle's encoder and actor. Read-only; safe to share
// between threads.
class NetPolicy {
 public:
  explicit NetPolicy(PolicyBundle bundle);

  // Action probabilities in legal_actions() order.
  std::vector<double> probabilities(const SimState& state) const;
  // Highest probability; ties go to the lowest action index.
  Action greedy(const SimState& state) const;

 private:
  std::vector<double> logits(const SimState& state) const;
  PolicyBundle bundle_;
};

ScheduleTrace rollout_greedy(const NetPolicy& policy, const Instance& instance);

struct SamplingResult {
  std::vector<int> best_per_repeat;
  double mean_best = 0.0;
  ScheduleTrace best;  // best trace over all repeats
};

SamplingResult rollout_sampling(const NetPolicy& policy, const Instance& instance, int k, int repeats,
                                std::uint64_t seed);

// (c_max - c_ub) / c_ub * 100. Throws ParameterError unless c_ub > 0.
double gap(double c_max, double c_ub);

struct UbTable {
  std::map<std::string, double> values;
  // Exact name first, then the name without its extension.
  std::optional<double> find(const std::string& name) const;
};

// Lines of `name value`; blank lines and lines starting with '#' are skipped.
UbTable parse_ub_table(const std::string& text);
UbTable load_ub_table(const std::filesystem::path& path);

struct EvalRow {
  std::string instance;
  std::string method;
  double makespan = 0.0;
  std::optional<double> gap;
  double seconds = 0.0;
  bool valid = true;  // every emitted trace passed validate
};

struct MethodSummary {
  std::string method;
  int rows = 0;
  int gap_rows = 0;
  double mean_makespan = 0.0;
  double mean_gap = 0.0;
  double std_gap = 0.0;
  double mean_seconds = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<MethodSummary> summary;
};

// Aggregates per method, in order of first appearance.
std::vector<MethodSummary> summarize(const std::vector<EvalRow>& rows);

struct SweepOptions {
  // "greedy", "sampling", "pdr:MOR-SPT", "ga", "random".
  std::vector<std::string> methods{"greedy"};
  int k = 100;
  int repeats = 3;
  std::uint64_t seed = 1;
  GaConfig ga;
  int jobs = 1;
};

// Rows are ordered by instance, then method. Network methods need a bundle.
EvalReport benchmark_sweep(const std::optional<PolicyBundle>& bundle, const std::vector<Instance>& instances,
                           const UbTable& ub, const SweepOptions& options);

// `<out>.jsonl` with one row per line and `<out>.summary.json`.
void write_report(const EvalReport& report, const std::filesystem::path& out);

}  // namespace cdqac
