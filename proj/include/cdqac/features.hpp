#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "cdqac/instance.hpp"
#include "cdqac/sim.hpp"

namespace cdqac {

inline constexpr int kOpFeatures = 10;
inline constexpr int kMachineFeatures = 8;
inline constexpr int kPairFeatures = 8;

// Per-state network input. One operation row per job: the job's next unscheduled
// operation, or its last operation once the job is finished (scheduled flag = 1).
// One machine row per machine, indexed by machine id. Pair rows follow the state's
// legal_actions() order.
struct FeatureFrame {
  int num_ops = 0;
  int num_machines = 0;
  int num_pairs = 0;
  std::vector<double> op_feats;    // num_ops x kOpFeatures, row-major
  std::vector<double> mach_feats;  // num_machines x kMachineFeatures
  std::vector<double> pair_feats;  // num_pairs x kPairFeatures
  std::vector<OpRef> op_ids;
  std::vector<std::uint8_t> op_pending;  // 1 if the row's op is still unscheduled
  std::vector<std::uint8_t> compat;      // num_ops x num_machines eligibility mask
  std::vector<std::pair<int, int>> pair_index;  // (op row, machine row)

  double op(int row, int col) const { return op_feats[static_cast<std::size_t>(row * kOpFeatures + col)]; }
  double mach(int row, int col) const { return mach_feats[static_cast<std::size_t>(row * kMachineFeatures + col)]; }
  double pair(int row, int col) const { return pair_feats[static_cast<std::size_t>(row * kPairFeatures + col)]; }
  bool compatible(int op_row, int machine) const {
    return compat[static_cast<std::size_t>(op_row * num_machines + machine)] != 0;
  }

  bool operator==(const FeatureFrame&) const = default;
};

// Column indices, in table order.
namespace opf {
enum : int { min_time, mean_time, span_time, compat_ratio, scheduled, lb_completion,
             job_ops_left, job_work_left, waiting, remaining_time };
}
namespace machf {
enum : int { min_time, mean_time, pending_ops, schedulable_now, free_in, waiting, working, remaining_time };
}
namespace pairf {
enum : int { time, ratio_op_max, ratio_schedulable_max, ratio_global_max, ratio_machine_max,
             ratio_compat_max, ratio_job_workload, joint_waiting };
}

// Throws ContractViolation on a terminal state.
FeatureFrame extract(const SimState& state);

// Per-column z-score statistics for the three feature blocks.
struct NormStats {
  std::array<double, kOpFeatures> op_mean{}, op_std{};
  std::array<double, kMachineFeatures> mach_mean{}, mach_std{};
  std::array<double, kPairFeatures> pair_mean{}, pair_std{};

  static constexpr double kStdFloor = 1e-6;

  // Identity transform.
  static NormStats identity();

  FeatureFrame apply(const FeatureFrame& frame) const;
  void apply_in_place(FeatureFrame& frame) const;

  bool operator==(const NormStats&) const = default;
};

// Throws ParameterError when there are no frames.
NormStats fit_normalizer(std::span<const FeatureFrame* const> frames);

}  // namespace cdqac
