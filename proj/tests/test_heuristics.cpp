#include <algorithm>
#include <set>

#include "cdqac/errors.hpp"
#include "cdqac/heuristics.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cdqac;

TEST_CASE("rule catalogue sizes and names") {
  const auto f = all_pdrs(ProblemKind::fjsp);
  const auto j = all_pdrs(ProblemKind::jsp);
  CHECK(f.size() == 16);
  CHECK(j.size() == 4);
  std::set<std::string> names;
  for (const auto& s : f) {
    names.insert(s.name());
    CHECK(PdrSpec::parse(s.name()) == s);
  }
  CHECK(names.size() == 16);
  for (const auto& s : j) CHECK(s.machine_rule == MachineRule::spt);
  CHECK(PdrSpec::parse("mwr-lpt").name() == "MWR-LPT");
  CHECK_THROWS_AS(PdrSpec::parse("XYZ-SPT"), ParameterError);
  CHECK_THROWS_AS(PdrSpec::parse("MOR-ABC"), ParameterError);
}

TEST_CASE("hand-traced rules on tiny1") {
  const Instance inst = testing::tiny1();
  // MOR-SPT: O11@M1[0,3], O21@M1[3,5], O12@M2[3,7], O22@M1[5,8].
  const auto mor = rollout(inst, pdr_policy(PdrSpec::parse("MOR-SPT")));
  CHECK(makespan(mor, inst) == 8);
  CHECK(mor.steps.front().action == Action{{0, 0}, 0});
  // LWR-LPT: J2 has less work, so O21@M1[0,2]; then O11 is forced onto M2.
  const auto lwr = rollout(inst, pdr_policy(PdrSpec::parse("LWR-LPT")));
  CHECK(makespan(lwr, inst) == 9);
  CHECK(lwr.steps[0].action == Action{{1, 0}, 0});
  CHECK(lwr.steps[1].action == Action{{0, 0}, 1});
  CHECK(testing::oracle_cstar(inst) == 8);
}

TEST_CASE("every rule yields a valid deterministic schedule no better than the optimum") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Instance inst = testing::small_instance(seed);
    const int cstar = testing::oracle_cstar(inst);
    for (const auto& spec : all_pdrs(inst.kind())) {
      const auto a = rollout(inst, pdr_policy(spec));
      const auto b = rollout(inst, pdr_policy(spec));
      CHECK(a == b);
      CHECK(validate(a, inst).empty());
      CHECK(makespan(a, inst) >= cstar);
    }
    const auto r = rollout(inst, random_policy(seed));
    CHECK(validate(r, inst).empty());
    CHECK(makespan(r, inst) >= cstar);
    CHECK(rollout(inst, random_policy(seed)) == r);
  }
}

TEST_CASE("repair restores precedence order") {
  std::vector<OpRef> seq{{1, 1}, {0, 1}, {1, 0}, {0, 0}, {1, 2}};
  repair_precedence(seq);
  const std::vector<OpRef> expected{{1, 0}, {0, 0}, {1, 1}, {0, 1}, {1, 2}};
  CHECK(seq == expected);
}

TEST_CASE("decode follows the sequence when assigned machines are free") {
  const Instance inst = testing::tiny1();
  Chromosome c;
  c.sequence = {{1, 0}, {1, 1}, {0, 0}, {0, 1}};
  c.assignment = {0, 1, 0, 1};  // O11->M1, O12->M2, O21->M1, O22->M2
  const auto t = decode(inst, c);
  CHECK(validate(t, inst).empty());
  // O21@M1[0,2]; O22 not ready; O11's machine busy so it falls back to M2 at t=0.
  CHECK(t.steps[0].action == Action{{1, 0}, 0});
  CHECK(t.steps[1].action == Action{{0, 0}, 1});
  CHECK_THROWS_AS(decode(inst, Chromosome{}), ContractViolation);
}

TEST_CASE("genetic algorithm bounds and determinism") {
  GaConfig cfg;
  cfg.population_size = 30;
  cfg.generations = 30;
  int reached = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Instance inst = testing::small_instance(100 + seed);
    cfg.seed = seed;
    const auto res = ga_solve(inst, cfg);
    const int cstar = testing::oracle_cstar(inst);
    CHECK(res.best_makespan >= cstar);
    reached += res.best_makespan == cstar;
    CHECK(res.best_makespan == makespan(res.best, inst));
    CHECK(validate(res.best, inst).empty());
    CHECK(res.best_history.size() == 31);
    CHECK(std::is_sorted(res.best_history.rbegin(), res.best_history.rend()));
    CHECK(res.population.size() == 30);
    for (std::size_t i = 0; i < res.population.size(); ++i) {
      CHECK(validate(res.population[i], inst).empty());
      CHECK(makespan(res.population[i], inst) == res.population_makespans[i]);
    }
    CHECK(ga_solve(inst, cfg).best == res.best);
  }
  CHECK(reached >= 8);
  GaConfig bad;
  bad.population_size = 1;
  CHECK_THROWS_AS(bad.check(), ParameterError);
}
