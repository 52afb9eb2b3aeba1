#include "cdqac/sim.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "cdqac/errors.hpp"

namespace cdqac {

int ScheduleTrace::max_end() const {
  int best = 0;
  for (const auto& s : steps) best = std::max(best, s.end);
  return best;
}

SimState::SimState(const Instance& instance)
    : instance_(&instance),
      machine_free_at_(static_cast<std::size_t>(instance.num_machines()), 0),
      job_front_(static_cast<std::size_t>(instance.num_jobs()), 0),
      job_ready_at_(static_cast<std::size_t>(instance.num_jobs()), 0),
      op_start_(static_cast<std::size_t>(instance.num_operations()), -1),
      op_end_(static_cast<std::size_t>(instance.num_operations()), -1),
      op_machine_(static_cast<std::size_t>(instance.num_operations()), -1) {
  trace_.steps.reserve(static_cast<std::size_t>(instance.num_operations()));
  refresh_legal();
}

OpPhase SimState::phase(OpRef op) const {
  const auto i = idx(op);
  if (op_start_[i] < 0) return OpPhase::unscheduled;
  return op_end_[i] <= now_ ? OpPhase::done : OpPhase::running;
}

bool SimState::is_legal(const Action& a) const {
  return std::find(legal_.begin(), legal_.end(), a) != legal_.end();
}

void SimState::refresh_legal() {
  legal_.clear();
  for (int j = 0; j < instance_->num_jobs(); ++j) {
    const int front = job_front(j);
    if (front >= instance_->job_length(j) || job_ready_at(j) > now_) continue;
    for (const auto& e : instance_->op({j, front}).eligible()) {
      if (machine_free_at(e.machine) <= now_) legal_.push_back({{j, front}, e.machine});
    }
  }
}

void SimState::advance_time() {
  while (legal_.empty() && !is_terminal()) {
    int next = std::numeric_limits<int>::max();
    for (int t : machine_free_at_)
      if (t > now_) next = std::min(next, t);
    for (int j = 0; j < instance_->num_jobs(); ++j) {
      if (job_front(j) < instance_->job_length(j) && job_ready_at(j) > now_) {
        next = std::min(next, job_ready_at(j));
      }
    }
    if (next == std::numeric_limits<int>::max()) {
      throw ContractViolation("simulator deadlock: no pending event");
    }
    now_ = next;
    refresh_legal();
  }
}

int SimState::apply(const Action& action) {
  if (!is_legal(action)) {
    throw ContractViolation("illegal action: op (" + std::to_string(action.op.job) + "," +
                            std::to_string(action.op.pos) + ") on machine " +
                            std::to_string(action.machine) + " at t=" + std::to_string(now_));
  }
  const int p = *instance_->op(action.op).time_on(action.machine);
  const int start = now_;
  const int end = start + p;
  const auto i = idx(action.op);
  op_start_[i] = start;
  op_end_[i] = end;
  op_machine_[i] = action.machine;
  machine_free_at_[static_cast<std::size_t>(action.machine)] = end;
  job_front_[static_cast<std::size_t>(action.op.job)] += 1;
  job_ready_at_[static_cast<std::size_t>(action.op.job)] = end;
  trace_.steps.push_back({action, start, end});
  const int before = partial_makespan_;
  partial_makespan_ = std::max(partial_makespan_, end);
  refresh_legal();
  advance_time();
  return before - partial_makespan_;
}

SimState initial_state(const Instance& instance) { return SimState(instance); }

StepResult step(const SimState& state, const Action& action) {
  SimState next = state;
  const int reward = next.apply(action);
  return {std::move(next), reward};
}

int makespan(const ScheduleTrace& trace, const Instance& instance) {
  if (static_cast<int>(trace.steps.size()) != instance.num_operations()) {
    throw ContractViolation("makespan: trace is incomplete (" + std::to_string(trace.steps.size()) +
                            " of " + std::to_string(instance.num_operations()) + " operations)");
  }
  return trace.max_end();
}

std::vector<Violation> validate(const ScheduleTrace& trace, const Instance& instance) {
  std::vector<Violation> out;
  const auto n_ops = static_cast<std::size_t>(instance.num_operations());
  std::vector<int> end_of(n_ops, -1);
  std::vector<int> machine_last_end(static_cast<std::size_t>(instance.num_machines()), 0);
  std::vector<std::vector<std::pair<int, int>>> intervals(static_cast<std::size_t>(instance.num_machines()));
  int last_start = 0;
  for (std::size_t s = 0; s < trace.steps.size(); ++s) {
    const auto& rec = trace.steps[s];
    const int index = static_cast<int>(s);
    const auto& a = rec.action;
    if (a.op.job < 0 || a.op.job >= instance.num_jobs() || a.op.pos < 0 ||
        a.op.pos >= instance.job_length(a.op.job)) {
      out.push_back({"unknown operation", "operation outside the instance", index});
      continue;
    }
    if (a.machine < 0 || a.machine >= instance.num_machines()) {
      out.push_back({"unknown machine", "machine outside the instance", index});
      continue;
    }
    const auto g = static_cast<std::size_t>(instance.op_index(a.op));
    if (end_of[g] >= 0) out.push_back({"duplicate", "operation scheduled twice", index});
    if (rec.start < 0) out.push_back({"negative start", "start time below zero", index});
    const auto p = instance.op(a.op).time_on(a.machine);
    if (!p) {
      out.push_back({"eligibility", "machine not eligible for operation", index});
    } else if (rec.end - rec.start != *p) {
      out.push_back({"duration", "end - start differs from processing time", index});
    }
    int pred_end = 0;
    if (a.op.pos > 0) {
      const auto pred = static_cast<std::size_t>(instance.op_index({a.op.job, a.op.pos - 1}));
      if (end_of[pred] < 0) {
        out.push_back({"precedence", "predecessor not scheduled before this operation", index});
      } else if (rec.start < end_of[pred]) {
        out.push_back({"precedence", "starts before its predecessor ends", index});
      }
      pred_end = std::max(end_of[pred], 0);
    }
    auto& prev_end = machine_last_end[static_cast<std::size_t>(a.machine)];
    if (rec.start < last_start) {
      out.push_back({"tightness", "dispatch times decrease along the trace", index});
    } else if (rec.start != std::max(pred_end, prev_end)) {
      out.push_back({"tightness", "start differs from its dispatch decision time", index});
    }
    last_start = std::max(last_start, rec.start);
    prev_end = std::max(prev_end, rec.end);
    end_of[g] = rec.end;
    intervals[static_cast<std::size_t>(a.machine)].push_back({rec.start, rec.end});
  }
  for (std::size_t k = 0; k < intervals.size(); ++k) {
    auto iv = intervals[k];
    std::sort(iv.begin(), iv.end());
    for (std::size_t i = 1; i < iv.size(); ++i) {
      if (iv[i].first < iv[i - 1].second) {
        out.push_back({"machine overlap", "intervals overlap on machine " + std::to_string(k), -1});
      }
    }
  }
  return out;
}

SimState replay(const Instance& instance, const ScheduleTrace& trace) {
  SimState state(instance);
  for (const auto& rec : trace.steps) {
    if (state.now() != rec.start) throw ContractViolation("replay: start time differs from decision time");
    state.apply(rec.action);
  }
  return state;
}

std::string export_trace(const ScheduleTrace& trace) {
  std::ostringstream out;
  for (const auto& s : trace.steps) {
    out << s.action.op.job << ' ' << s.action.op.pos << ' ' << s.action.machine << ' ' << s.start
        << ' ' << s.end << '\n';
  }
  return out.str();
}

ScheduleTrace import_trace(const std::string& text) {
  ScheduleTrace trace;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    ScheduledOp s;
    if (!(fields >> s.action.op.job >> s.action.op.pos >> s.action.machine >> s.start >> s.end)) {
      throw ParseError(number, "expected 'job op machine start end'");
    }
    trace.steps.push_back(s);
  }
  return trace;
}

}  // namespace cdqac
