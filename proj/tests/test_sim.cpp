#include <algorithm>

#include "cdqac/errors.hpp"
#include "cdqac/heuristics.hpp"
#include "cdqac/sim.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cdqac;

TEST_CASE("tiny1 initial legal pairs") {
  const Instance inst = testing::tiny1();
  const SimState s(inst);
  CHECK(s.now() == 0);
  const std::vector<Action> expected{{{0, 0}, 0}, {{0, 0}, 1}, {{1, 0}, 0}};
  CHECK(s.legal_actions() == expected);
  CHECK_FALSE(s.is_legal({{0, 1}, 1}));
}

TEST_CASE("tiny1 hand-traced episode") {
  const Instance inst = testing::tiny1();
  SimState s(inst);
  // O21 on M1 [0,2]; O11 on M2 [0,5]; O22 on M1 [2,5]; O12 on M2 [5,9].
  CHECK(s.apply({{1, 0}, 0}) == -2);
  CHECK(s.now() == 0);
  CHECK(s.apply({{0, 0}, 1}) == -3);
  // Nothing is free at 0 any more; time jumps to 2 when M1 and J2 become ready.
  CHECK(s.now() == 2);
  CHECK(s.legal_actions() == std::vector<Action>{{{1, 1}, 0}});
  CHECK(s.apply({{1, 1}, 0}) == 0);
  CHECK(s.now() == 5);
  CHECK(s.apply({{0, 1}, 1}) == -4);
  CHECK(s.is_terminal());
  CHECK(s.partial_makespan() == 9);
  CHECK(makespan(s.trace(), inst) == 9);
  CHECK(validate(s.trace(), inst).empty());
}

TEST_CASE("illegal actions are contract violations") {
  const Instance inst = testing::tiny1();
  SimState s(inst);
  CHECK_THROWS_AS(s.apply({{0, 1}, 1}), ContractViolation);
  CHECK_THROWS_AS(s.apply({{1, 0}, 1}), ContractViolation);
}

TEST_CASE("step leaves the input state untouched") {
  const Instance inst = testing::tiny1();
  const SimState s(inst);
  const auto r = step(s, {{1, 0}, 0});
  CHECK(s.scheduled_count() == 0);
  CHECK(r.next.scheduled_count() == 1);
  CHECK(r.reward == -2);
}

TEST_CASE("single machine: makespan is the sum of processing times for any policy") {
  std::vector<Job> jobs(3);
  jobs[0].operations = {Operation({{0, 4}}), Operation({{0, 2}})};
  jobs[1].operations = {Operation({{0, 7}})};
  jobs[2].operations = {Operation({{0, 1}}), Operation({{0, 3}}), Operation({{0, 5}})};
  const Instance inst(ProblemKind::fjsp, 1, jobs);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t = rollout(inst, random_policy(seed));
    CHECK(makespan(t, inst) == 22);
  }
}

TEST_CASE("random episodes: rewards sum to minus makespan and traces are tight") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Instance inst = seed % 2 ? generate_fjsp(5, 3, seed) : generate_jsp(4, 3, seed);
    SimState s(inst);
    Rng rng(seed);
    long total = 0;
    int last_now = 0;
    while (!s.is_terminal()) {
      REQUIRE_FALSE(s.legal_actions().empty());
      CHECK(s.now() >= last_now);
      last_now = s.now();
      const auto& legal = s.legal_actions();
      const int r = s.apply(legal[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(legal.size()) - 1))]);
      CHECK(r <= 0);
      total += r;
    }
    CHECK(total == -makespan(s.trace(), inst));
    CHECK(validate(s.trace(), inst).empty());
    // Independent tightness oracle: every start equals max(job predecessor end, previous end on its machine).
    std::vector<int> job_end(static_cast<std::size_t>(inst.num_jobs()), 0);
    std::vector<int> mach_end(static_cast<std::size_t>(inst.num_machines()), 0);
    for (const auto& st : s.trace().steps) {
      CHECK(st.start == std::max(job_end[st.action.op.job], mach_end[st.action.machine]));
      job_end[st.action.op.job] = st.end;
      mach_end[st.action.machine] = st.end;
    }
  }
}

TEST_CASE("validate flags each kind of corruption") {
  const Instance inst = testing::tiny1();
  const ScheduleTrace good = rollout(inst, pdr_policy(PdrSpec::parse("MOR-SPT")));
  REQUIRE(validate(good, inst).empty());
  auto has = [&](const ScheduleTrace& t, const std::string& kind) {
    const auto v = validate(t, inst);
    return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.kind == kind; });
  };

  ScheduleTrace dup = good;
  dup.steps.push_back(dup.steps.front());
  CHECK(has(dup, "duplicate"));

  ScheduleTrace wrong_machine = good;
  for (auto& st : wrong_machine.steps) {
    if (st.action.op == OpRef{1, 0}) st.action.machine = 1;
  }
  CHECK(has(wrong_machine, "eligibility"));

  ScheduleTrace wrong_duration = good;
  wrong_duration.steps.front().end += 1;
  CHECK(has(wrong_duration, "duration"));

  ScheduleTrace swapped = good;
  // Put a successor before its predecessor.
  auto succ = std::find_if(swapped.steps.begin(), swapped.steps.end(), [](const ScheduledOp& s) { return s.action.op.pos == 1; });
  std::rotate(swapped.steps.begin(), succ, succ + 1);
  CHECK(has(swapped, "precedence"));

  ScheduleTrace delayed = good;
  for (auto& st : delayed.steps) {
    st.start += 1;
    st.end += 1;
  }
  CHECK(has(delayed, "tightness"));

  ScheduleTrace unknown = good;
  unknown.steps.front().action.machine = 7;
  CHECK(has(unknown, "unknown machine"));
}

TEST_CASE("overlapping intervals on a machine are reported") {
  std::vector<Job> jobs(2);
  jobs[0].operations = {Operation({{0, 3}})};
  jobs[1].operations = {Operation({{0, 3}})};
  const Instance inst(ProblemKind::fjsp, 1, jobs);
  ScheduleTrace t;
  t.steps = {{{{0, 0}, 0}, 0, 3}, {{{1, 0}, 0}, 1, 4}};
  const auto v = validate(t, inst);
  CHECK(std::any_of(v.begin(), v.end(), [](const Violation& x) { return x.kind == "machine overlap"; }));
}

TEST_CASE("trace text export round-trips and replays") {
  const Instance inst = generate_fjsp(5, 3, 11);
  const ScheduleTrace t = rollout(inst, random_policy(4));
  const ScheduleTrace back = import_trace(export_trace(t));
  CHECK(back == t);
  const SimState s = replay(inst, back);
  CHECK(s.is_terminal());
  CHECK(s.trace() == t);
  CHECK_THROWS_AS(makespan(ScheduleTrace{}, inst), ContractViolation);
}
