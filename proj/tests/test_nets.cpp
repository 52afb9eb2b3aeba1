#include <cmath>
#include <map>

#include "cdqac/errors.hpp"
#include "cdqac/heuristics.hpp"
#include "cdqac/nets.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cdqac;
using ad::Matrix;
using ad::Tensor;

namespace {

// A mid-episode state of a random instance.
SimState midway(const Instance& inst, std::uint64_t seed, int steps) {
  SimState s(inst);
  auto policy = random_policy(seed);
  for (int i = 0; i < steps && !s.is_terminal(); ++i) s.apply(policy(s));
  return s;
}

Instance relabel_machines(const Instance& inst, const std::vector<int>& perm) {
  std::vector<Job> jobs;
  for (const auto& j : inst.jobs()) {
    Job nj;
    for (const auto& op : j.operations) {
      std::vector<MachineTime> el;
      for (const auto& e : op.eligible()) el.push_back({perm[static_cast<std::size_t>(e.machine)], e.time});
      nj.operations.emplace_back(el);
    }
    jobs.push_back(nj);
  }
  return Instance(inst.kind(), inst.num_machines(), jobs);
}

struct Outputs {
  Matrix z, q, v, logits, global;
};

Outputs run(const Networks& nets, std::span<const FeatureFrame* const> frames) {
  const BatchGraph g = make_batch(frames);
  const Embeddings e = nets.encoder.forward(g);
  Outputs o;
  o.z = nets.critic1.forward(e, g).value();
  o.q = q_values(nets.critic1.forward(e, g)).value();
  const Tensor v = nets.critic1.value(e);
  if (v.defined()) o.v = v.value();
  o.logits = nets.actor.logits(e).value();
  o.global = e.global.value();
  return o;
}

Outputs run_one(const Networks& nets, const FeatureFrame& f) {
  const FeatureFrame* p = &f;
  return run(nets, std::span<const FeatureFrame* const>(&p, 1));
}

}  // namespace

TEST_CASE("quantile fractions are interval midpoints") {
  const auto t = quantile_fractions(4);
  REQUIRE(t.size() == 4);
  CHECK(t[0] == 0.125);
  CHECK(t[1] == 0.375);
  CHECK(t[2] == 0.625);
  CHECK(t[3] == 0.875);
  CHECK(quantile_fractions(1) == std::vector<double>{0.5});
}

TEST_CASE("network shapes and finite outputs") {
  const Networks nets(NetConfig{}, 3);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Instance inst = generate_fjsp(5, 3, seed);
    const SimState s = midway(inst, seed, static_cast<int>(seed % 6));
    const FeatureFrame f = extract(s);
    const Outputs o = run_one(nets, f);
    CHECK(o.z.rows() == f.num_pairs);
    CHECK(o.z.cols() == 64);
    CHECK(o.logits.rows() == f.num_pairs);
    CHECK(o.global.cols() == 16);
    CHECK(o.z.allFinite());
    CHECK(o.logits.allFinite());
  }
}

TEST_CASE("dueling combination is centred over legal pairs") {
  const Networks nets(NetConfig{}, 4);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Instance inst = generate_fjsp(4, 4, seed);
    const FeatureFrame f = extract(midway(inst, seed, 2));
    const Outputs o = run_one(nets, f);
    // mean over pairs of Z equals V for every quantile.
    const Matrix diff = o.z.colwise().mean() - o.v.row(0);
    CHECK(diff.cwiseAbs().maxCoeff() < 1e-10);
  }
  // A state with a single legal pair has Z = V exactly.
  std::vector<Job> jobs(1);
  jobs[0].operations = {Operation({{0, 4}}), Operation({{1, 2}})};
  const Instance one(ProblemKind::fjsp, 2, jobs);
  const Outputs o = run_one(nets, extract(SimState(one)));
  REQUIRE(o.z.rows() == 1);
  CHECK((o.z - o.v).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("outputs are equivariant to machine relabelling") {
  const Networks nets(NetConfig{}, 5);
  const std::vector<int> perm{2, 0, 3, 1};
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Instance a = generate_fjsp(4, 4, seed);
    const Instance b = relabel_machines(a, perm);
    // Dispatch the same decisions in both instances.
    SimState sa(a), sb(b);
    auto policy = random_policy(seed);
    for (int i = 0; i < 3; ++i) {
      const Action act = policy(sa);
      sa.apply(act);
      sb.apply({act.op, perm[static_cast<std::size_t>(act.machine)]});
    }
    const FeatureFrame fa = extract(sa), fb = extract(sb);
    const Outputs oa = run_one(nets, fa), ob = run_one(nets, fb);
    std::map<std::pair<int, int>, int> row_b;
    for (int r = 0; r < fb.num_pairs; ++r) row_b[fb.pair_index[static_cast<std::size_t>(r)]] = r;
    REQUIRE(fa.num_pairs == fb.num_pairs);
    for (int r = 0; r < fa.num_pairs; ++r) {
      const auto [job, m] = fa.pair_index[static_cast<std::size_t>(r)];
      const int rb = row_b.at({job, perm[static_cast<std::size_t>(m)]});
      CHECK((oa.z.row(r) - ob.z.row(rb)).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(std::abs(oa.logits(r, 0) - ob.logits(rb, 0)) < 1e-9);
    }
    CHECK((oa.global - ob.global).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("states in a batch do not influence each other") {
  const Networks nets(NetConfig{}, 6);
  const FeatureFrame f1 = extract(midway(generate_fjsp(4, 3, 1), 1, 3));
  const FeatureFrame f2 = extract(midway(generate_fjsp(6, 4, 2), 2, 5));
  const FeatureFrame* both[] = {&f1, &f2};
  const Outputs ob = run(nets, both);
  const Outputs o1 = run_one(nets, f1), o2 = run_one(nets, f2);
  CHECK((ob.z.topRows(f1.num_pairs) - o1.z).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((ob.z.bottomRows(f2.num_pairs) - o2.z).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((ob.logits.bottomRows(f2.num_pairs) - o2.logits).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("twin minimum and log policy against loops") {
  Rng rng(9);
  Matrix a(3, 4), b(3, 4);
  for (int i = 0; i < 12; ++i) {
    a.data()[i] = rng.uniform01();
    b.data()[i] = rng.uniform01();
  }
  const Matrix m = twin_min(Tensor::constant(a), Tensor::constant(b)).value();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) CHECK(m(r, c) == std::min(a(r, c), b(r, c)));

  const Networks nets(NetConfig{}, 7);
  const FeatureFrame f1 = extract(midway(generate_fjsp(4, 3, 3), 3, 1));
  const FeatureFrame f2 = extract(midway(generate_fjsp(4, 3, 4), 4, 4));
  const FeatureFrame* both[] = {&f1, &f2};
  const BatchGraph g = make_batch(both);
  const Tensor logits = nets.actor.logits(nets.encoder.forward(g));
  const Matrix lp = log_policy(logits, g).value();
  for (int s = 0; s < 2; ++s) {
    const int lo = g.pair_offset[static_cast<std::size_t>(s)], hi = g.pair_offset[static_cast<std::size_t>(s) + 1];
    double mx = -1e300, z = 0.0, total = 0.0;
    for (int r = lo; r < hi; ++r) mx = std::max(mx, logits.value()(r, 0));
    for (int r = lo; r < hi; ++r) z += std::exp(logits.value()(r, 0) - mx);
    for (int r = lo; r < hi; ++r) {
      CHECK(lp(r, 0) == doctest::Approx(logits.value()(r, 0) - mx - std::log(z)));
      total += std::exp(lp(r, 0));
    }
    CHECK(total == doctest::Approx(1.0));
  }
}

TEST_CASE("ablated heads: one quantile, no dueling") {
  NetConfig cfg;
  cfg.num_quantiles = 1;
  cfg.dueling = false;
  const Networks nets(cfg, 8);
  const Outputs o = run_one(nets, extract(SimState(generate_fjsp(3, 3, 1))));
  CHECK(o.z.cols() == 1);
  CHECK(o.v.size() == 0);
  NetConfig bad;
  bad.heads = 0;
  CHECK_THROWS_AS(bad.check(), ParameterError);
}

TEST_CASE("construction is seeded and targets start as copies") {
  Networks a(NetConfig{}, 11), b(NetConfig{}, 11), c(NetConfig{}, 12);
  const auto pa = a.critic_parameters(), pb = b.critic_parameters(), pc = c.critic_parameters();
  const auto ta = a.target_parameters();
  REQUIRE(pa.size() == ta.size());
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].value() == pb[i].value());
    CHECK(pa[i].value() == ta[i].value());
    differs = differs || pa[i].value() != pc[i].value();
  }
  CHECK(differs);
  CHECK(a.stores().size() == 7);
}

TEST_CASE("empty batches are rejected") {
  CHECK_THROWS_AS(make_batch(std::span<const FeatureFrame* const>{}), ContractViolation);
}
