#include <algorithm>
#include <cctype>
#include <memory>

#include "cdqac/errors.hpp"
#include "cdqac/heuristics.hpp"
#include "cdqac/rng.hpp"

namespace cdqac {
namespace {

const char* job_rule_name(JobRule r) {
  switch (r) {
    case JobRule::mor: return "MOR";
    case JobRule::lor: return "LOR";
    case JobRule::mwr: return "MWR";
    case JobRule::lwr: return "LWR";
  }
  return "?";
}

const char* machine_rule_name(MachineRule r) {
  switch (r) {
    case MachineRule::spt: return "SPT";
    case MachineRule::lpt: return "LPT";
    case MachineRule::est: return "EST";
    case MachineRule::lst: return "LST";
  }
  return "?";
}

double remaining_work(const SimState& s, int job) {
  const auto& inst = s.instance();
  double total = 0.0;
  for (int p = s.job_front(job); p < inst.job_length(job); ++p) total += inst.op({job, p}).mean_time();
  return total;
}

}  // namespace

std::string PdrSpec::name() const {
  return std::string(job_rule_name(job_rule)) + "-" + machine_rule_name(machine_rule);
}

PdrSpec PdrSpec::parse(std::string_view text) {
  std::string upper(text);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  const auto dash = upper.find('-');
  const std::string job = upper.substr(0, dash);
  const std::string mach = dash == std::string::npos ? "SPT" : upper.substr(dash + 1);
  PdrSpec spec;
  if (job == "MOR") spec.job_rule = JobRule::mor;
  else if (job == "LOR") spec.job_rule = JobRule::lor;
  else if (job == "MWR") spec.job_rule = JobRule::mwr;
  else if (job == "LWR") spec.job_rule = JobRule::lwr;
  else throw ParameterError("unknown job rule '" + job + "'");
  if (mach == "SPT") spec.machine_rule = MachineRule::spt;
  else if (mach == "LPT") spec.machine_rule = MachineRule::lpt;
  else if (mach == "EST") spec.machine_rule = MachineRule::est;
  else if (mach == "LST") spec.machine_rule = MachineRule::lst;
  else throw ParameterError("unknown machine rule '" + mach + "'");
  return spec;
}

std::vector<PdrSpec> all_pdrs(ProblemKind kind) {
  const JobRule jobs[] = {JobRule::mor, JobRule::lor, JobRule::mwr, JobRule::lwr};
  const MachineRule machines[] = {MachineRule::spt, MachineRule::lpt, MachineRule::est, MachineRule::lst};
  std::vector<PdrSpec> out;
  for (auto j : jobs) {
    if (kind == ProblemKind::jsp) {
      out.push_back({j, MachineRule::spt});
      continue;
    }
    for (auto m : machines) out.push_back({j, m});
  }
  return out;
}

ScheduleTrace rollout(const Instance& instance, const Policy& policy) {
  SimState state(instance);
  while (!state.is_terminal()) state.apply(policy(state));
  return state.trace();
}

Policy pdr_policy(PdrSpec spec) {
  return [spec](const SimState& s) -> Action {
    const auto& legal = s.legal_actions();
    if (legal.empty()) throw ContractViolation("pdr_policy: no legal action");
    // legal is job-major, so the first pair of each job marks the candidate jobs.
    int best_job = -1;
    double best_key = 0.0;
    for (const auto& a : legal) {
      const int j = a.op.job;
      if (j == best_job) continue;
      double key = 0.0;
      switch (spec.job_rule) {
        case JobRule::mor:
        case JobRule::lor:
          key = s.instance().job_length(j) - s.job_front(j);
          break;
        case JobRule::mwr:
        case JobRule::lwr:
          key = remaining_work(s, j);
          break;
      }
      const bool prefer_max = spec.job_rule == JobRule::mor || spec.job_rule == JobRule::mwr;
      if (best_job < 0 || (prefer_max ? key > best_key : key < best_key)) {
        best_job = j;
        best_key = key;
      }
    }
    const Action* best = nullptr;
    double best_m = 0.0;
    for (const auto& a : legal) {
      if (a.op.job != best_job) continue;
      double key = 0.0;
      switch (spec.machine_rule) {
        case MachineRule::spt:
        case MachineRule::lpt:
          key = *s.instance().op(a.op).time_on(a.machine);
          break;
        case MachineRule::est:
        case MachineRule::lst:
          // How long the machine has been idle; never-used machines count from t = 0.
          key = s.now() - s.machine_free_at(a.machine);
          break;
      }
      const bool prefer_max = spec.machine_rule == MachineRule::lpt || spec.machine_rule == MachineRule::lst;
      if (!best || (prefer_max ? key > best_m : key < best_m)) {
        best = &a;
        best_m = key;
      }
    }
    return *best;
  };
}

Policy random_policy(std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [rng](const SimState& s) -> Action {
    const auto& legal = s.legal_actions();
    if (legal.empty()) throw ContractViolation("random_policy: no legal action");
    const auto i = rng->uniform_int(0, static_cast<std::int64_t>(legal.size()) - 1);
    return legal[static_cast<std::size_t>(i)];
  };
}

}  // namespace cdqac
