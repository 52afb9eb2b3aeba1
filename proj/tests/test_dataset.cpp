#include <filesystem>
#include <map>
#include <set>
#include <tuple>

#include "cdqac/dataset.hpp"
#include "cdqac/errors.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cdqac;

namespace {

std::vector<Instance> fjsp_set(int count, std::uint64_t base, int n = 4, int m = 3) {
  std::vector<Instance> v;
  for (int i = 0; i < count; ++i) {
    v.push_back(generate_fjsp(n, m, base + static_cast<std::uint64_t>(i)));
    v.back().set_name("inst" + std::to_string(i));
  }
  return v;
}

// Distinct (instance, time, scheduled set, action) tuples found by replaying every trajectory.
long replay_unique_pairs(const Dataset& d) {
  using Key = std::tuple<int, int, std::vector<std::array<int, 5>>, int, int, int>;
  std::set<Key> keys;
  for (const auto& tr : d.trajectories()) {
    const Instance& inst = d.instances()[static_cast<std::size_t>(tr.instance)];
    SimState s(inst);
    for (std::size_t k = 0; k < tr.actions.size(); ++k) {
      std::vector<std::array<int, 5>> done;
      for (const auto& st : s.trace().steps) done.push_back({st.action.op.job, st.action.op.pos, st.action.machine, st.start, st.end});
      std::sort(done.begin(), done.end());
      const Action a = s.legal_actions()[static_cast<std::size_t>(tr.actions[k])];
      // Structurally equal instances share states.
      int id = tr.instance;
      for (std::size_t o = 0; o < d.instances().size(); ++o)
        if (d.instances()[o] == inst) {
          id = static_cast<int>(o);
          break;
        }
      keys.emplace(id, s.now(), done, a.op.job, a.op.pos, a.machine);
      s.apply(a);
    }
  }
  return static_cast<long>(keys.size());
}

}  // namespace

TEST_CASE("recipe names") {
  for (Recipe r : {Recipe::pdr, Recipe::ga, Recipe::pdr_ga, Recipe::random}) CHECK(parse_recipe(to_string(r)) == r);
  CHECK(to_string(Recipe::pdr_ga) == "pdr-ga");
  CHECK_THROWS_AS(parse_recipe("greedy"), ParameterError);
}

TEST_CASE("solution counts before and after dedup") {
  const auto insts = fjsp_set(3, 10);
  BuildOptions o;
  o.ga.population_size = 12;
  o.ga.generations = 3;
  o.random_per_instance = 9;
  const std::map<Recipe, int> nominal{{Recipe::pdr, 16}, {Recipe::ga, 12}, {Recipe::pdr_ga, 28}, {Recipe::random, 9}};
  for (const auto& [recipe, count] : nominal) {
    o.recipe = recipe;
    const Dataset d = build_dataset(insts, o);
    CHECK(d.manifest().solutions_per_instance == count);
    for (int i = 0; i < 3; ++i) {
      CHECK(d.manifest().dedup.before_per_instance[static_cast<std::size_t>(i)] == count);
      // Oracle: the number of distinct behaviour traces.
      std::set<std::string> distinct;
      for (const auto& [src, t] : behavior_solutions(insts[static_cast<std::size_t>(i)], recipe, o,
                                                     Rng(o.seed).split(static_cast<std::uint64_t>(i)).next_u64()))
        distinct.insert(export_trace(t));
      CHECK(d.manifest().dedup.after_per_instance[static_cast<std::size_t>(i)] == static_cast<int>(distinct.size()));
    }
    CHECK(d.manifest().dedup.after == static_cast<long>(d.trajectories().size()));
  }
  BuildOptions jsp;
  const Dataset dj = build_dataset({generate_jsp(3, 3, 1)}, jsp);
  CHECK(dj.manifest().dedup.before == 4);
}

TEST_CASE("trajectories are consistent with the simulator") {
  BuildOptions o;
  o.recipe = Recipe::random;
  o.random_per_instance = 5;
  const Dataset d = build_dataset(fjsp_set(4, 20), o);
  long transitions = 0;
  for (const auto& tr : d.trajectories()) {
    const Instance& inst = d.instances()[static_cast<std::size_t>(tr.instance)];
    CHECK(validate(tr.trace, inst).empty());
    CHECK(static_cast<int>(tr.actions.size()) == inst.num_operations());
    long sum = 0;
    SimState s(inst);
    for (std::size_t k = 0; k < tr.actions.size(); ++k) {
      CHECK(tr.frames[k] == extract(s));
      sum += tr.rewards[k];
      s.apply(s.legal_actions()[static_cast<std::size_t>(tr.actions[k])]);
    }
    CHECK(s.trace() == tr.trace);
    CHECK(sum == -tr.makespan);
    transitions += static_cast<long>(tr.actions.size());
  }
  CHECK(d.num_transitions() == transitions);
  CHECK(d.manifest().transitions == transitions);
  long terminals = 0;
  for (long i = 0; i < d.num_transitions(); ++i) {
    const Transition& t = d.transition(i);
    const auto& tr = d.trajectories()[static_cast<std::size_t>(t.trajectory)];
    CHECK(t.terminal == (t.step + 1 == static_cast<int>(tr.actions.size())));
    terminals += t.terminal;
    if (t.terminal) CHECK_THROWS_AS(d.next_state(t), ContractViolation);
    else CHECK(d.next_state(t) == tr.frames[static_cast<std::size_t>(t.step) + 1]);
  }
  CHECK(terminals == static_cast<long>(d.trajectories().size()));
}

TEST_CASE("builds are deterministic, also across worker counts") {
  BuildOptions o;
  o.recipe = Recipe::pdr_ga;
  o.ga.population_size = 8;
  o.ga.generations = 2;
  const auto insts = fjsp_set(5, 30);
  const Dataset a = build_dataset(insts, o);
  o.jobs = 3;
  const Dataset b = build_dataset(insts, o);
  CHECK(a == b);
  o.seed = 2;
  CHECK_FALSE(build_dataset(insts, o) == a);
}

TEST_CASE("save and load round-trip exactly") {
  BuildOptions o;
  o.recipe = Recipe::random;
  o.random_per_instance = 4;
  const Dataset d = build_dataset(fjsp_set(3, 40), o);
  const auto dir = std::filesystem::temp_directory_path() / "cdqac_test_dataset";
  std::filesystem::remove_all(dir);
  save_dataset(d, dir);
  const Dataset back = load_dataset(dir);
  CHECK(back == d);
  CHECK(back.norm() == d.norm());
  CHECK(back.num_transitions() == d.num_transitions());
  std::filesystem::remove_all(dir);
  CHECK_THROWS(load_dataset(dir));
}

TEST_CASE("subsets by instances and by solutions") {
  BuildOptions o;
  o.with_features = false;
  const Dataset d = build_dataset(fjsp_set(500, 1000, 2, 2), o);
  SubsetSpec one_percent;
  one_percent.fraction = 0.01;
  const Dataset s = subset(d, one_percent);
  CHECK(s.instances().size() == 5);
  std::set<std::string> names(d.manifest().instance_names.begin(), d.manifest().instance_names.end());
  for (const auto& n : s.manifest().instance_names) CHECK(names.count(n) == 1);
  CHECK(subset(d, one_percent) == s);

  SubsetSpec per;
  per.axis = SubsetAxis::solutions;
  per.count = 1;
  const Dataset p = subset(d, per);
  CHECK(p.instances().size() == 500);
  CHECK(p.trajectories().size() == 500);

  SubsetSpec bad;
  CHECK_THROWS_AS(subset(d, bad), ParameterError);
  bad.fraction = 0.0;
  CHECK_THROWS_AS(subset(d, bad), ParameterError);
  SubsetSpec tiny;
  tiny.fraction = 0.0001;
  CHECK_THROWS_AS(subset(d, tiny), ParameterError);
}

TEST_CASE("state-action coverage") {
  BuildOptions o;
  o.recipe = Recipe::random;
  o.random_per_instance = 20;
  o.with_features = false;
  const auto insts = fjsp_set(4, 50, 3, 2);
  const Dataset ref = build_dataset(insts, o);
  CHECK(unique_state_actions(ref) == replay_unique_pairs(ref));
  CHECK(saco(ref, ref) == 1.0);
  o.recipe = Recipe::pdr;
  const Dataset pdr = build_dataset(insts, o);
  CHECK(unique_state_actions(pdr) == replay_unique_pairs(pdr));
  const double c = saco(pdr, ref);
  CHECK(c > 0.0);
  CHECK(c == doctest::Approx(static_cast<double>(replay_unique_pairs(pdr)) / replay_unique_pairs(ref)));
  SubsetSpec half;
  half.axis = SubsetAxis::solutions;
  half.fraction = 0.5;
  CHECK(saco(subset(ref, half), ref) <= 1.0);
}

TEST_CASE("makespan histogram") {
  const auto insts = fjsp_set(2, 60);
  BuildOptions o;
  o.recipe = Recipe::random;
  o.random_per_instance = 30;
  const Dataset d = build_dataset(insts, o);
  const auto h = makespan_histogram(d, 10);
  CHECK(h.edges.size() == 11);
  long total = 0;
  for (long c : h.counts) total += c;
  CHECK(total == static_cast<long>(d.trajectories().size()));
  CHECK(h.counts.back() >= 2);  // the best of each instance lands in the top bin
  for (double v : h.values) {
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(h.q1 <= h.median);
  CHECK(h.median <= h.q3);
  CHECK_THROWS_AS(makespan_histogram(d, 0), ParameterError);
}

TEST_CASE("histogram quartiles on a hand-built dataset") {
  // One instance; makespans 10, 20, 40, 50 -> ratios 1, .5, .25, .2.
  std::vector<Job> jobs(1);
  jobs[0].operations = {Operation({{0, 1}})};
  const Instance inst(ProblemKind::fjsp, 1, jobs);
  std::vector<Trajectory> trs;
  for (int ms : {10, 20, 40, 50}) {
    Trajectory t;
    t.makespan = ms;
    trs.push_back(t);
  }
  const Dataset d({inst}, trs, DatasetManifest{});
  const auto h = makespan_histogram(d, 4);
  // Sorted .2, .25, .5, 1 with linear interpolation at positions .75, 1.5, 2.25.
  CHECK(h.q1 == doctest::Approx(0.2 + 0.75 * 0.05));
  CHECK(h.median == doctest::Approx(0.375));
  CHECK(h.q3 == doctest::Approx(0.5 + 0.25 * 0.5));
  CHECK(h.counts == std::vector<long>{1, 1, 1, 1});
}

TEST_CASE("batch sampling") {
  BuildOptions o;
  const Dataset d = build_dataset(fjsp_set(2, 70, 3, 2), o);
  Rng r1(5), r2(5);
  const auto a = sample_batch(d, 10, r1);
  const auto b = sample_batch(d, 10, r2);
  CHECK(a.size() == 10);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].trajectory == b[i].trajectory);
  Rng r3(6);
  std::set<std::pair<int, int>> seen;
  for (int i = 0; i < 200; ++i)
    for (const auto& t : sample_batch(d, static_cast<int>(d.num_transitions()), r3)) seen.emplace(t.trajectory, t.step);
  CHECK(static_cast<long>(seen.size()) == d.num_transitions());
  CHECK_THROWS_AS(sample_batch(d, 0, r3), ParameterError);
  CHECK_THROWS_AS(sample_batch(d, static_cast<int>(d.num_transitions()) + 1, r3), ParameterError);
  CHECK_THROWS_AS(sample_batch(Dataset{}, 1, r3), ParameterError);
}
