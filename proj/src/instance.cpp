#include "cdqac/instance.hpp"

#include <algorithm>
#include <numeric>

#include "cdqac/errors.hpp"
#include "cdqac/rng.hpp"

namespace cdqac {

std::string to_string(ProblemKind kind) { return kind == ProblemKind::jsp ? "jsp" : "fjsp"; }

ProblemKind parse_problem_kind(std::string_view text) {
  if (text == "jsp" || text == "JSP") return ProblemKind::jsp;
  if (text == "fjsp" || text == "FJSP") return ProblemKind::fjsp;
  throw ParameterError("unknown problem kind '" + std::string(text) + "'");
}

Operation::Operation(std::vector<MachineTime> eligible) : eligible_(std::move(eligible)) {
  std::sort(eligible_.begin(), eligible_.end());
  if (eligible_.empty()) return;
  min_time_ = eligible_.front().time;
  max_time_ = eligible_.front().time;
  double sum = 0.0;
  for (const auto& e : eligible_) {
    min_time_ = std::min(min_time_, e.time);
    max_time_ = std::max(max_time_, e.time);
    sum += e.time;
  }
  mean_time_ = sum / static_cast<double>(eligible_.size());
}

std::optional<int> Operation::time_on(int machine) const {
  auto it = std::lower_bound(eligible_.begin(), eligible_.end(), machine,
                             [](const MachineTime& e, int m) { return e.machine < m; });
  if (it == eligible_.end() || it->machine != machine) return std::nullopt;
  return it->time;
}

Instance::Instance(ProblemKind kind, int num_machines, std::vector<Job> jobs, std::string name)
    : kind_(kind), num_machines_(num_machines), jobs_(std::move(jobs)), name_(std::move(name)) {
  if (num_machines_ < 1) throw ParameterError("instance needs at least one machine");
  if (jobs_.empty()) throw ParameterError("instance needs at least one job");
  offsets_.reserve(jobs_.size());
  workload_.reserve(jobs_.size());
  for (std::size_t j = 0; j < jobs_.size(); ++j) {
    const auto& ops = jobs_[j].operations;
    if (ops.empty()) throw ParameterError("job " + std::to_string(j) + " has no operations");
    offsets_.push_back(static_cast<int>(refs_.size()));
    double workload = 0.0;
    for (std::size_t p = 0; p < ops.size(); ++p) {
      const auto& el = ops[p].eligible();
      if (el.empty()) {
        throw ParameterError("operation (" + std::to_string(j) + "," + std::to_string(p) +
                             ") has no eligible machine");
      }
      if (kind_ == ProblemKind::jsp && el.size() != 1) {
        throw ParameterError("JSP operation (" + std::to_string(j) + "," + std::to_string(p) +
                             ") must have exactly one machine");
      }
      for (std::size_t e = 0; e < el.size(); ++e) {
        if (el[e].machine < 0 || el[e].machine >= num_machines_) {
          throw ParameterError("machine index out of range");
        }
        if (e > 0 && el[e].machine == el[e - 1].machine) {
          throw ParameterError("duplicate eligible machine");
        }
        if (el[e].time < 1) throw ParameterError("processing times must be >= 1");
        max_time_ = std::max(max_time_, el[e].time);
      }
      workload += ops[p].mean_time();
      refs_.push_back({static_cast<int>(j), static_cast<int>(p)});
    }
    workload_.push_back(workload);
  }
}

const Operation& Instance::op(OpRef r) const {
  return job(r.job).operations.at(static_cast<std::size_t>(r.pos));
}

double Instance::average_flexibility() const {
  std::size_t pairs = 0;
  for (const auto& job : jobs_)
    for (const auto& op : job.operations) pairs += op.eligible().size();
  return static_cast<double>(pairs) / static_cast<double>(refs_.size());
}

std::uint64_t Instance::content_hash() const {
  Fnv1a h;
  h.add(kind_ == ProblemKind::jsp ? 0 : 1);
  h.add(num_machines_);
  h.add(num_jobs());
  for (const auto& job : jobs_) {
    h.add(static_cast<std::int64_t>(job.operations.size()));
    for (const auto& op : job.operations) {
      h.add(static_cast<std::int64_t>(op.eligible().size()));
      for (const auto& e : op.eligible()) {
        h.add(e.machine);
        h.add(e.time);
      }
    }
  }
  return h.value();
}

Instance generate_fjsp(int num_jobs, int num_machines, std::uint64_t seed, int p_lo, int p_hi) {
  if (num_jobs < 1 || num_machines < 1) throw ParameterError("generate_fjsp: n and m must be >= 1");
  if (p_lo < 1 || p_hi < p_lo) throw ParameterError("generate_fjsp: invalid time range");
  Rng rng(seed);
  const int lo_ops = std::max(1, (num_machines * 8) / 10);
  const int hi_ops = std::max(lo_ops, (num_machines * 12) / 10);
  std::vector<int> machines(static_cast<std::size_t>(num_machines));
  std::vector<Job> jobs(static_cast<std::size_t>(num_jobs));
  for (auto& job : jobs) {
    const auto n_ops = rng.uniform_int(lo_ops, hi_ops);
    for (std::int64_t o = 0; o < n_ops; ++o) {
      const auto k = static_cast<std::size_t>(rng.uniform_int(1, num_machines));
      std::iota(machines.begin(), machines.end(), 0);
      // Partial Fisher-Yates: the first k slots are a uniform k-subset.
      for (std::size_t i = 0; i < k; ++i) {
        auto j = static_cast<std::size_t>(
            rng.uniform_int(static_cast<std::int64_t>(i), num_machines - 1));
        std::swap(machines[i], machines[j]);
      }
      std::vector<int> chosen(machines.begin(), machines.begin() + static_cast<std::ptrdiff_t>(k));
      std::sort(chosen.begin(), chosen.end());
      std::vector<MachineTime> eligible;
      for (int m : chosen) {
        eligible.push_back({m, static_cast<int>(rng.uniform_int(p_lo, p_hi))});
      }
      job.operations.emplace_back(std::move(eligible));
    }
  }
  return Instance(ProblemKind::fjsp, num_machines, std::move(jobs));
}

Instance generate_jsp(int num_jobs, int num_machines, std::uint64_t seed, int p_lo, int p_hi) {
  if (num_jobs < 1 || num_machines < 1) throw ParameterError("generate_jsp: n and m must be >= 1");
  if (p_lo < 1 || p_hi < p_lo) throw ParameterError("generate_jsp: invalid time range");
  Rng rng(seed);
  std::vector<Job> jobs(static_cast<std::size_t>(num_jobs));
  std::vector<int> order(static_cast<std::size_t>(num_machines));
  for (auto& job : jobs) {
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (int m : order) {
      job.operations.emplace_back(
          std::vector<MachineTime>{{m, static_cast<int>(rng.uniform_int(p_lo, p_hi))}});
    }
  }
  return Instance(ProblemKind::jsp, num_machines, std::move(jobs));
}

}  // namespace cdqac
