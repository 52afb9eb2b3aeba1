#pragma once

#include <algorithm>
#include <climits>
#include <string>
#include <vector>

#include "cdqac/instance.hpp"
#include "cdqac/rng.hpp"

namespace testing {

inline std::string fixture(const std::string& name) { return std::string(CDQAC_FIXTURE_DIR) + "/" + name; }

// J1 = O11{M1:3, M2:5}, O12{M2:4}; J2 = O21{M1:2}, O22{M1:3, M2:1} (machines 0-based here).
inline cdqac::Instance tiny1() {
  using cdqac::Job;
  using cdqac::Operation;
  std::vector<Job> jobs(2);
  jobs[0].operations = {Operation({{0, 3}, {1, 5}}), Operation({{1, 4}})};
  jobs[1].operations = {Operation({{0, 2}}), Operation({{0, 3}, {1, 1}})};
  return cdqac::Instance(cdqac::ProblemKind::fjsp, 2, std::move(jobs), "tiny1");
}

// Best makespan over every non-delay dispatch sequence, by depth-first enumeration with
// its own bookkeeping. Decision time is the earliest start over all (front op, machine)
// candidates; the pairs that can start then are the branching set.
class NonDelayOracle {
 public:
  explicit NonDelayOracle(const cdqac::Instance& inst) : inst_(inst) {}

  int solve() {
    best_ = INT_MAX;
    std::vector<int> front(static_cast<std::size_t>(inst_.num_jobs()), 0);
    std::vector<int> job_ready(front.size(), 0);
    std::vector<int> mach_free(static_cast<std::size_t>(inst_.num_machines()), 0);
    dfs(front, job_ready, mach_free, 0, 0);
    return best_;
  }

  long leaves() const { return leaves_; }

 private:
  void dfs(std::vector<int>& front, std::vector<int>& job_ready, std::vector<int>& mach_free, int done, int cmax) {
    if (cmax >= best_) return;
    if (done == inst_.num_operations()) {
      best_ = cmax;
      ++leaves_;
      return;
    }
    int t = INT_MAX;
    for (int j = 0; j < inst_.num_jobs(); ++j) {
      if (front[j] >= inst_.job_length(j)) continue;
      for (const auto& e : inst_.op({j, front[j]}).eligible()) t = std::min(t, std::max(job_ready[j], mach_free[e.machine]));
    }
    for (int j = 0; j < inst_.num_jobs(); ++j) {
      if (front[j] >= inst_.job_length(j)) continue;
      for (const auto& e : inst_.op({j, front[j]}).eligible()) {
        if (std::max(job_ready[j], mach_free[e.machine]) != t) continue;
        const int saved_ready = job_ready[j], saved_free = mach_free[e.machine];
        job_ready[j] = mach_free[e.machine] = t + e.time;
        ++front[j];
        dfs(front, job_ready, mach_free, done + 1, std::max(cmax, t + e.time));
        --front[j];
        job_ready[j] = saved_ready;
        mach_free[e.machine] = saved_free;
      }
    }
  }

  const cdqac::Instance& inst_;
  int best_ = INT_MAX;
  long leaves_ = 0;
};

inline int oracle_cstar(const cdqac::Instance& inst) { return NonDelayOracle(inst).solve(); }

// Random FJSP instance with at most max_ops operations in total.
inline cdqac::Instance small_instance(std::uint64_t seed, int max_ops = 8) {
  cdqac::Rng rng(seed);
  for (;;) {
    const int n = static_cast<int>(rng.uniform_int(2, 4));
    const int m = static_cast<int>(rng.uniform_int(2, 3));
    auto inst = cdqac::generate_fjsp(n, m, rng.next_u64(), 1, 9);
    if (inst.num_operations() <= max_ops) return inst;
  }
}

}  // namespace testing
