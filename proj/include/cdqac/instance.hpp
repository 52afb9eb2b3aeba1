#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cdqac {

enum class ProblemKind { jsp, fjsp };

std::string to_string(ProblemKind kind);
ProblemKind parse_problem_kind(std::string_view text);

// Position of an operation: job index and position inside the job, both 0-based.
struct OpRef {
  int job = 0;
  int pos = 0;
  auto operator<=>(const OpRef&) const = default;
};

struct MachineTime {
  int machine = 0;
  int time = 0;
  auto operator<=>(const MachineTime&) const = default;
};

// One operation with its eligible machines, sorted by machine index.
class Operation {
 public:
  Operation() = default;
  explicit Operation(std::vector<MachineTime> eligible);

  const std::vector<MachineTime>& eligible() const { return eligible_; }
  std::optional<int> time_on(int machine) const;
  bool eligible_on(int machine) const { return time_on(machine).has_value(); }

  int min_time() const { return min_time_; }
  int max_time() const { return max_time_; }
  double mean_time() const { return mean_time_; }

  bool operator==(const Operation& other) const { return eligible_ == other.eligible_; }

 private:
  std::vector<MachineTime> eligible_;
  int min_time_ = 0;
  int max_time_ = 0;
  double mean_time_ = 0.0;
};

struct Job {
  std::vector<Operation> operations;
  bool operator==(const Job&) const = default;
};

// Immutable JSP/FJSP problem description. Construction validates every invariant
// (non-empty jobs, eligible machines in range, positive times, one machine per JSP op).
class Instance {
 public:
  Instance(ProblemKind kind, int num_machines, std::vector<Job> jobs, std::string name = {});

  ProblemKind kind() const { return kind_; }
  int num_jobs() const { return static_cast<int>(jobs_.size()); }
  int num_machines() const { return num_machines_; }
  int num_operations() const { return static_cast<int>(refs_.size()); }
  const std::vector<Job>& jobs() const { return jobs_; }
  const Job& job(int j) const { return jobs_.at(static_cast<std::size_t>(j)); }
  int job_length(int j) const { return static_cast<int>(job(j).operations.size()); }
  const Operation& op(OpRef r) const;
  const Operation& op(int global) const { return op(refs_.at(static_cast<std::size_t>(global))); }

  // Dense operation numbering: job-major, position-minor.
  int op_index(OpRef r) const { return offsets_.at(static_cast<std::size_t>(r.job)) + r.pos; }
  OpRef op_ref(int global) const { return refs_.at(static_cast<std::size_t>(global)); }

  // Sum over the job's operations of the mean processing time over eligible machines.
  double job_workload(int j) const { return workload_.at(static_cast<std::size_t>(j)); }
  int max_time() const { return max_time_; }
  double average_flexibility() const;

  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  // Content hash over kind, machine count and all processing data (name excluded).
  std::uint64_t content_hash() const;

  // Structural equality; the name is not compared.
  bool operator==(const Instance& other) const {
    return kind_ == other.kind_ && num_machines_ == other.num_machines_ && jobs_ == other.jobs_;
  }

 private:
  ProblemKind kind_;
  int num_machines_;
  std::vector<Job> jobs_;
  std::string name_;
  std::vector<int> offsets_;
  std::vector<OpRef> refs_;
  std::vector<double> workload_;
  int max_time_ = 0;
};

// Random FJSP instance: ops per job uniform in [max(1, floor(0.8 m)), floor(1.2 m)],
// k ~ U[1, m] eligible machines per op drawn without replacement, times U[p_lo, p_hi].
Instance generate_fjsp(int num_jobs, int num_machines, std::uint64_t seed, int p_lo = 1,
                       int p_hi = 99);

// Random Taillard-style JSP instance: each job visits a random permutation of all machines.
Instance generate_jsp(int num_jobs, int num_machines, std::uint64_t seed, int p_lo = 1,
                      int p_hi = 99);

// Standard FJSP text (Brandimarte/Hurink layout, 1-based machines).
Instance parse_standard_fjsp(std::string_view text);

struct TaillardOptions {
  // Number of the first machine in the interleaved layout (0 for the common files, 1 for
  // 1-based variants). Subtracted on read.
  int machine_base = 0;
};

// Taillard JSP text. Accepts the interleaved `n m` / `machine time ...` layout, and
// Taillard's original "Times" + "Machines" matrix layout (1-based machines).
Instance parse_taillard_jsp(std::string_view text, TaillardOptions options = {});

// Canonical text: standard FJSP format for FJSP instances, interleaved Taillard
// format (0-based machines) for JSP instances.
std::string serialize(const Instance& instance);
std::string serialize_fjsp(const Instance& instance);
std::string serialize_taillard(const Instance& instance);

// Parses the canonical form of either kind.
Instance parse_instance(std::string_view text, ProblemKind kind);

Instance load_instance(const std::string& path, std::optional<ProblemKind> kind = {});
void save_instance(const Instance& instance, const std::string& path);

}  // namespace cdqac
