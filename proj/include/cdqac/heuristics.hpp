#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "cdqac/instance.hpp"
#include "cdqac/sim.hpp"

namespace cdqac {

// Picks one of state.legal_actions(). Policies may keep internal state (e.g. an RNG).
using Policy = std::function<Action(const SimState&)>;

// Runs a policy from the initial state to completion.
ScheduleTrace rollout(const Instance& instance, const Policy& policy);

enum class JobRule { mor, lor, mwr, lwr };
enum class MachineRule { spt, lpt, est, lst };

struct PdrSpec {
  JobRule job_rule = JobRule::mor;
  MachineRule machine_rule = MachineRule::spt;

  // "MWR-SPT" style name.
  std::string name() const;
  static PdrSpec parse(std::string_view text);
  bool operator==(const PdrSpec&) const = default;
};

// 16 job x machine rules for FJSP; the four job rules (machine rule SPT) for JSP.
std::vector<PdrSpec> all_pdrs(ProblemKind kind);

// Priority dispatching rule: the job rule chooses among jobs with a legal pair, then the
// machine rule chooses among that job's legal machines. Ties go to the lowest index.
Policy pdr_policy(PdrSpec spec);

// Uniform choice over the legal pairs.
Policy random_policy(std::uint64_t seed);

struct GaConfig {
  int population_size = 200;
  int generations = 100;
  double crossover_prob = 0.7;
  double mutation_prob = 0.2;
  int tournament_size = 3;
  std::uint64_t seed = 1;

  void check() const;
};

// Two-vector chromosome. `sequence` lists every operation once in precedence order;
// `assignment[g]` is the machine for global operation g.
struct Chromosome {
  std::vector<OpRef> sequence;
  std::vector<int> assignment;
};

// Non-delay decoding: at each decision point dispatch the first pending op in sequence
// order whose assigned machine is free; if none is, the first pending op with any free
// eligible machine goes to its fastest free machine.
ScheduleTrace decode(const Instance& instance, const Chromosome& chromosome);

// Restores precedence order by reassigning each job's operations, in position order,
// to the slots that job occupies.
void repair_precedence(std::vector<OpRef>& sequence);

struct GaResult {
  ScheduleTrace best;
  int best_makespan = 0;
  std::vector<ScheduleTrace> population;  // final generation, decoded
  std::vector<int> population_makespans;
  std::vector<int> best_history;          // best makespan after each generation (index 0 = initial)
};

GaResult ga_solve(const Instance& instance, const GaConfig& config);

}  // namespace cdqac
