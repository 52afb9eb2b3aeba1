#pragma once

#include <string>
#include <vector>

#include "cdqac/instance.hpp"

namespace cdqac {

// A dispatch decision: start operation `op` on `machine` at the current decision time.
struct Action {
  OpRef op;
  int machine = 0;
  auto operator<=>(const Action&) const = default;
};

struct ScheduledOp {
  Action action;
  int start = 0;
  int end = 0;
  bool operator==(const ScheduledOp&) const = default;
};

// Dispatches in decision order.
struct ScheduleTrace {
  std::vector<ScheduledOp> steps;

  int max_end() const;
  bool operator==(const ScheduleTrace&) const = default;
};

enum class OpPhase { unscheduled, running, done };

// Partial schedule at a decision point under non-delay semantics. Holds a pointer to
// the instance, which must outlive the state. Copyable value type.
class SimState {
 public:
  explicit SimState(const Instance& instance);

  const Instance& instance() const { return *instance_; }
  int now() const { return now_; }
  int machine_free_at(int k) const { return machine_free_at_[static_cast<std::size_t>(k)]; }
  // Position of the next unscheduled op of job j (== job length when finished).
  int job_front(int j) const { return job_front_[static_cast<std::size_t>(j)]; }
  // Completion time of the last scheduled op of job j (0 if none).
  int job_ready_at(int j) const { return job_ready_at_[static_cast<std::size_t>(j)]; }
  int partial_makespan() const { return partial_makespan_; }
  int scheduled_count() const { return static_cast<int>(trace_.steps.size()); }
  bool is_terminal() const { return scheduled_count() == instance_->num_operations(); }

  OpPhase phase(OpRef op) const;
  // Start/end/machine of a scheduled op; -1 when unscheduled.
  int op_start(OpRef op) const { return op_start_[idx(op)]; }
  int op_end(OpRef op) const { return op_end_[idx(op)]; }
  int op_machine(OpRef op) const { return op_machine_[idx(op)]; }

  // Legal machine-operation pairs at now(): job-major, machine-minor order.
  const std::vector<Action>& legal_actions() const { return legal_; }
  bool is_legal(const Action& a) const;

  // Applies a legal action, then advances time until a pair is available or the
  // schedule is complete. Returns the reward (negative partial-makespan increase).
  int apply(const Action& action);

  const ScheduleTrace& trace() const { return trace_; }

 private:
  std::size_t idx(OpRef op) const { return static_cast<std::size_t>(instance_->op_index(op)); }
  void refresh_legal();
  void advance_time();

  const Instance* instance_;
  int now_ = 0;
  int partial_makespan_ = 0;
  std::vector<int> machine_free_at_;
  std::vector<int> job_front_;
  std::vector<int> job_ready_at_;
  std::vector<int> op_start_;
  std::vector<int> op_end_;
  std::vector<int> op_machine_;
  std::vector<Action> legal_;
  ScheduleTrace trace_;
};

SimState initial_state(const Instance& instance);

struct StepResult {
  SimState next;
  int reward;
};

// Value-semantics step: copies the state, applies the action.
StepResult step(const SimState& state, const Action& action);

// Makespan of a complete trace; throws ContractViolation if any op is missing.
int makespan(const ScheduleTrace& trace, const Instance& instance);

struct Violation {
  std::string kind;  // "precedence", "machine overlap", "eligibility", ...
  std::string detail;
  int index = -1;    // trace position
};

// Independent feasibility audit of a (possibly partial) trace.
std::vector<Violation> validate(const ScheduleTrace& trace, const Instance& instance);

// Replays a trace through the simulator; throws ContractViolation on illegal steps.
SimState replay(const Instance& instance, const ScheduleTrace& trace);

// Line-delimited `job op machine start end` records.
std::string export_trace(const ScheduleTrace& trace);
ScheduleTrace import_trace(const std::string& text);

}  // namespace cdqac
