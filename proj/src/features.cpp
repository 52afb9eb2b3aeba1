#include "cdqac/features.hpp"

#include <algorithm>
#include <cmath>

#include "cdqac/errors.hpp"

namespace cdqac {

FeatureFrame extract(const SimState& s) {
  if (s.is_terminal()) throw ContractViolation("extract: terminal state has no decision");
  const Instance& inst = s.instance();
  const int n = inst.num_jobs();
  const int m = inst.num_machines();
  const int t = s.now();
  const auto& legal = s.legal_actions();

  // Per-machine statistics over all unscheduled compatible operations (O_k).
  std::vector<int> ok_count(static_cast<std::size_t>(m), 0), ok_min(static_cast<std::size_t>(m), 0),
      ok_max(static_cast<std::size_t>(m), 0);
  std::vector<double> ok_sum(static_cast<std::size_t>(m), 0.0);
  int global_max = 0;
  for (int j = 0; j < n; ++j) {
    for (int p = s.job_front(j); p < inst.job_length(j); ++p) {
      for (const auto& e : inst.op({j, p}).eligible()) {
        const auto k = static_cast<std::size_t>(e.machine);
        ok_min[k] = ok_count[k] == 0 ? e.time : std::min(ok_min[k], e.time);
        ok_max[k] = std::max(ok_max[k], e.time);
        ok_sum[k] += e.time;
        ok_count[k] += 1;
        global_max = std::max(global_max, e.time);
      }
    }
  }
  std::vector<int> legal_count(static_cast<std::size_t>(m), 0), legal_max(static_cast<std::size_t>(m), 0);
  for (const auto& a : legal) {
    const auto k = static_cast<std::size_t>(a.machine);
    legal_count[k] += 1;
    legal_max[k] = std::max(legal_max[k], *inst.op(a.op).time_on(a.machine));
  }

  FeatureFrame f;
  f.num_ops = n;
  f.num_machines = m;
  f.num_pairs = static_cast<int>(legal.size());
  f.op_feats.resize(static_cast<std::size_t>(n * kOpFeatures));
  f.mach_feats.resize(static_cast<std::size_t>(m * kMachineFeatures));
  f.pair_feats.resize(static_cast<std::size_t>(f.num_pairs * kPairFeatures));
  f.op_ids.resize(static_cast<std::size_t>(n));
  f.op_pending.resize(static_cast<std::size_t>(n));
  f.compat.assign(static_cast<std::size_t>(n * m), 0);

  std::vector<double> op_waiting(static_cast<std::size_t>(n), 0.0);
  for (int j = 0; j < n; ++j) {
    const int len = inst.job_length(j);
    const int front = s.job_front(j);
    const bool pending = front < len;
    const OpRef ref{j, pending ? front : len - 1};
    const Operation& op = inst.op(ref);
    double work_left = 0.0;
    for (int p = front; p < len; ++p) work_left += inst.op({j, p}).mean_time();
    double waiting = 0.0;
    if (pending && s.job_ready_at(j) <= t) waiting = t - s.job_ready_at(j);
    op_waiting[static_cast<std::size_t>(j)] = waiting;

    double* row = &f.op_feats[static_cast<std::size_t>(j * kOpFeatures)];
    row[opf::min_time] = op.min_time();
    row[opf::mean_time] = op.mean_time();
    row[opf::span_time] = op.max_time() - op.min_time();
    row[opf::compat_ratio] = static_cast<double>(op.eligible().size()) / m;
    row[opf::scheduled] = pending ? 0.0 : 1.0;
    row[opf::lb_completion] =
        pending ? std::max(t, s.job_ready_at(j)) + op.min_time() : static_cast<double>(s.op_end(ref));
    row[opf::job_ops_left] = len - front;
    row[opf::job_work_left] = work_left;
    row[opf::waiting] = waiting;
    row[opf::remaining_time] = pending ? 0.0 : std::max(0, s.op_end(ref) - t);

    f.op_ids[static_cast<std::size_t>(j)] = ref;
    f.op_pending[static_cast<std::size_t>(j)] = pending ? 1 : 0;
    for (const auto& e : op.eligible()) f.compat[static_cast<std::size_t>(j * m + e.machine)] = 1;
  }

  std::vector<double> mach_waiting(static_cast<std::size_t>(m), 0.0);
  for (int k = 0; k < m; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const int free_at = s.machine_free_at(k);
    const bool working = free_at > t;
    double* row = &f.mach_feats[static_cast<std::size_t>(k * kMachineFeatures)];
    row[machf::min_time] = ok_min[ku];
    row[machf::mean_time] = ok_count[ku] > 0 ? ok_sum[ku] / ok_count[ku] : 0.0;
    row[machf::pending_ops] = ok_count[ku];
    row[machf::schedulable_now] = legal_count[ku];
    row[machf::free_in] = std::max(0, free_at - t);
    row[machf::waiting] = working ? 0.0 : t - free_at;
    row[machf::working] = working ? 1.0 : 0.0;
    row[machf::remaining_time] = working ? free_at - t : 0.0;
    mach_waiting[ku] = row[machf::waiting];
  }

  f.pair_index.reserve(legal.size());
  for (std::size_t a = 0; a < legal.size(); ++a) {
    const auto& act = legal[a];
    const Operation& op = inst.op(act.op);
    const double p = *op.time_on(act.machine);
    const auto k = static_cast<std::size_t>(act.machine);
    double* row = &f.pair_feats[a * kPairFeatures];
    row[pairf::time] = p;
    row[pairf::ratio_op_max] = p / op.max_time();
    row[pairf::ratio_schedulable_max] = p / legal_max[k];
    row[pairf::ratio_global_max] = p / global_max;
    row[pairf::ratio_machine_max] = p / ok_max[k];
    row[pairf::ratio_compat_max] = p / op.max_time();
    row[pairf::ratio_job_workload] = p / inst.job_workload(act.op.job);
    row[pairf::joint_waiting] = op_waiting[static_cast<std::size_t>(act.op.job)] + mach_waiting[k];
    f.pair_index.emplace_back(act.op.job, act.machine);
  }
  return f;
}

NormStats NormStats::identity() {
  NormStats s;
  s.op_std.fill(1.0);
  s.mach_std.fill(1.0);
  s.pair_std.fill(1.0);
  return s;
}

namespace {

template <std::size_t C>
void normalize_block(std::vector<double>& data, const std::array<double, C>& mean,
                     const std::array<double, C>& sd) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t c = i % C;
    data[i] = (data[i] - mean[c]) / std::max(sd[c], NormStats::kStdFloor);
  }
}

template <std::size_t C>
void fit_block(std::span<const FeatureFrame* const> frames, std::vector<double> FeatureFrame::*member,
               std::array<double, C>& mean, std::array<double, C>& sd) {
  std::array<double, C> sum{};
  std::size_t rows = 0;
  for (const auto* f : frames) {
    const auto& d = f->*member;
    for (std::size_t i = 0; i < d.size(); ++i) sum[i % C] += d[i];
    rows += d.size() / C;
  }
  if (rows == 0) {
    mean.fill(0.0);
    sd.fill(1.0);
    return;
  }
  for (std::size_t c = 0; c < C; ++c) mean[c] = sum[c] / static_cast<double>(rows);
  std::array<double, C> sq{};
  for (const auto* f : frames) {
    const auto& d = f->*member;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double dev = d[i] - mean[i % C];
      sq[i % C] += dev * dev;
    }
  }
  for (std::size_t c = 0; c < C; ++c) sd[c] = std::sqrt(sq[c] / static_cast<double>(rows));
}

}  // namespace

void NormStats::apply_in_place(FeatureFrame& frame) const {
  normalize_block(frame.op_feats, op_mean, op_std);
  normalize_block(frame.mach_feats, mach_mean, mach_std);
  normalize_block(frame.pair_feats, pair_mean, pair_std);
}

FeatureFrame NormStats::apply(const FeatureFrame& frame) const {
  FeatureFrame out = frame;
  apply_in_place(out);
  return out;
}

NormStats fit_normalizer(std::span<const FeatureFrame* const> frames) {
  if (frames.empty()) throw ParameterError("fit_normalizer: empty dataset");
  NormStats s;
  fit_block(frames, &FeatureFrame::op_feats, s.op_mean, s.op_std);
  fit_block(frames, &FeatureFrame::mach_feats, s.mach_mean, s.mach_std);
  fit_block(frames, &FeatureFrame::pair_feats, s.pair_mean, s.pair_std);
  return s;
}

}  // namespace cdqac
