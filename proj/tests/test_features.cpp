#include <cmath>

#include "cdqac/errors.hpp"
#include "cdqac/features.hpp"
#include "cdqac/heuristics.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cdqac;
using doctest::Approx;

TEST_CASE("tiny1 initial frame, computed by hand") {
  const Instance inst = testing::tiny1();
  const SimState s(inst);
  const FeatureFrame f = extract(s);
  REQUIRE(f.num_ops == 2);
  REQUIRE(f.num_machines == 2);
  REQUIRE(f.num_pairs == 3);

  // O11 {M1:3, M2:5}
  CHECK(f.op(0, opf::min_time) == 3);
  CHECK(f.op(0, opf::mean_time) == 4);
  CHECK(f.op(0, opf::span_time) == 2);
  CHECK(f.op(0, opf::compat_ratio) == 1.0);
  CHECK(f.op(0, opf::lb_completion) == 3);
  CHECK(f.op(0, opf::job_ops_left) == 2);
  CHECK(f.op(0, opf::job_work_left) == 8);
  // O21 {M1:2}
  CHECK(f.op(1, opf::compat_ratio) == 0.5);
  CHECK(f.op(1, opf::lb_completion) == 2);
  CHECK(f.op(1, opf::job_work_left) == 4);

  CHECK(f.mach(0, machf::min_time) == 2);
  CHECK(f.mach(0, machf::mean_time) == Approx(8.0 / 3.0));
  CHECK(f.mach(0, machf::pending_ops) == 3);
  CHECK(f.mach(0, machf::schedulable_now) == 2);
  CHECK(f.mach(1, machf::min_time) == 1);
  CHECK(f.mach(1, machf::mean_time) == Approx(10.0 / 3.0));
  CHECK(f.mach(1, machf::schedulable_now) == 1);

  // Pairs in legal order: (O11,M1), (O11,M2), (O21,M1).
  CHECK(f.pair_index == std::vector<std::pair<int, int>>{{0, 0}, {0, 1}, {1, 0}});
  const double expected[3][kPairFeatures] = {
      {3, 0.6, 1.0, 0.6, 1.0, 0.6, 0.375, 0},
      {5, 1.0, 1.0, 1.0, 1.0, 1.0, 0.625, 0},
      {2, 1.0, 2.0 / 3.0, 0.4, 2.0 / 3.0, 1.0, 0.5, 0},
  };
  for (int a = 0; a < 3; ++a)
    for (int c = 0; c < kPairFeatures; ++c) CHECK(f.pair(a, c) == Approx(expected[a][c]));
  CHECK(f.compatible(0, 1));
  CHECK_FALSE(f.compatible(1, 1));
}

TEST_CASE("frame after one dispatch tracks busy machines and blocked jobs") {
  const Instance inst = testing::tiny1();
  SimState s(inst);
  s.apply({{1, 0}, 0});  // O21 on M1 over [0,2]
  const FeatureFrame f = extract(s);
  CHECK(f.op_ids[1] == OpRef{1, 1});
  CHECK(f.op(1, opf::lb_completion) == 3);
  CHECK(f.op(1, opf::waiting) == 0);
  CHECK(f.mach(0, machf::working) == 1);
  CHECK(f.mach(0, machf::free_in) == 2);
  CHECK(f.mach(0, machf::remaining_time) == 2);
  CHECK(f.mach(0, machf::waiting) == 0);
  CHECK(f.num_pairs == 1);
}

TEST_CASE("frame invariants along random episodes") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Instance inst = generate_fjsp(4, 3, seed);
    SimState s(inst);
    auto policy = random_policy(seed);
    while (!s.is_terminal()) {
      const FeatureFrame f = extract(s);
      CHECK(f.num_pairs == static_cast<int>(s.legal_actions().size()));
      CHECK(f.op_feats.size() == static_cast<std::size_t>(f.num_ops * kOpFeatures));
      for (int a = 0; a < f.num_pairs; ++a) {
        const auto& act = s.legal_actions()[static_cast<std::size_t>(a)];
        CHECK(f.pair_index[static_cast<std::size_t>(a)] == std::pair<int, int>{act.op.job, act.machine});
        CHECK(f.op_pending[static_cast<std::size_t>(act.op.job)] == 1);
        CHECK(f.compatible(act.op.job, act.machine));
        for (int c = pairf::ratio_op_max; c <= pairf::ratio_compat_max; ++c) {
          CHECK(f.pair(a, c) > 0.0);
          CHECK(f.pair(a, c) <= 1.0 + 1e-12);
        }
        CHECK(f.pair(a, pairf::ratio_job_workload) > 0.0);
      }
      for (int k = 0; k < f.num_machines; ++k) {
        // A machine is either running an op or idle, never both.
        CHECK((f.mach(k, machf::working) == 0.0 || f.mach(k, machf::waiting) == 0.0));
        CHECK(f.mach(k, machf::schedulable_now) <= f.mach(k, machf::pending_ops));
      }
      s.apply(policy(s));
    }
    CHECK_THROWS_AS(extract(s), ContractViolation);
  }
}

TEST_CASE("fitted normalizer standardizes the frames it was fitted on") {
  std::vector<FeatureFrame> frames;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Instance inst = generate_fjsp(4, 3, seed);
    SimState s(inst);
    auto policy = random_policy(seed);
    while (!s.is_terminal()) {
      frames.push_back(extract(s));
      s.apply(policy(s));
    }
  }
  std::vector<const FeatureFrame*> ptrs;
  for (const auto& f : frames) ptrs.push_back(&f);
  const NormStats norm = fit_normalizer(ptrs);
  double sum[kPairFeatures] = {}, sq[kPairFeatures] = {};
  long rows = 0;
  for (const auto& f : frames) {
    const FeatureFrame g = norm.apply(f);
    for (int a = 0; a < g.num_pairs; ++a, ++rows)
      for (int c = 0; c < kPairFeatures; ++c) {
        sum[c] += g.pair(a, c);
        sq[c] += g.pair(a, c) * g.pair(a, c);
      }
  }
  for (int c = 0; c < kPairFeatures; ++c) {
    CHECK(sum[c] / rows == Approx(0.0).epsilon(1e-9).scale(1.0));
    // Constant columns stay at zero; every other column gets unit variance.
    if (norm.pair_std[static_cast<std::size_t>(c)] > NormStats::kStdFloor) CHECK(sq[c] / rows == Approx(1.0));
  }
  CHECK(NormStats::identity().apply(frames.front()) == frames.front());
  CHECK_THROWS_AS(fit_normalizer(std::span<const FeatureFrame* const>{}), ParameterError);
}
