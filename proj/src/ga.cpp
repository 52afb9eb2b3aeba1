#include <algorithm>
#include <limits>

#include "cdqac/errors.hpp"
#include "cdqac/heuristics.hpp"
#include "cdqac/rng.hpp"

namespace cdqac {
namespace {

struct Individual {
  Chromosome genes;
  ScheduleTrace trace;
  int fitness = 0;
};

void evaluate(const Instance& inst, Individual& ind) {
  ind.trace = decode(inst, ind.genes);
  ind.fitness = ind.trace.max_end();
}

Chromosome random_chromosome(const Instance& inst, Rng& rng) {
  Chromosome c;
  for (int j = 0; j < inst.num_jobs(); ++j)
    for (int p = 0; p < inst.job_length(j); ++p) c.sequence.push_back({j, 0});
  rng.shuffle(c.sequence);
  repair_precedence(c.sequence);
  c.assignment.resize(static_cast<std::size_t>(inst.num_operations()));
  for (int g = 0; g < inst.num_operations(); ++g) {
    const auto& el = inst.op(g).eligible();
    c.assignment[static_cast<std::size_t>(g)] =
        el[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(el.size()) - 1))].machine;
  }
  return c;
}

const Individual& tournament(const std::vector<Individual>& pop, int size, Rng& rng) {
  const Individual* best = nullptr;
  for (int i = 0; i < size; ++i) {
    const auto& cand = pop[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pop.size()) - 1))];
    if (!best || cand.fitness < best->fitness) best = &cand;
  }
  return *best;
}

// Precedence-preserving order crossover: genes of a random job subset keep their slots
// from `keep`; the remaining slots take the other jobs' genes in `fill` order.
std::vector<OpRef> pox(const std::vector<OpRef>& keep, const std::vector<OpRef>& fill,
                       const std::vector<bool>& subset) {
  std::vector<OpRef> child(keep.size());
  std::vector<bool> taken(keep.size(), false);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (subset[static_cast<std::size_t>(keep[i].job)]) {
      child[i] = keep[i];
      taken[i] = true;
    }
  }
  std::size_t slot = 0;
  for (const auto& g : fill) {
    if (subset[static_cast<std::size_t>(g.job)]) continue;
    while (taken[slot]) ++slot;
    child[slot++] = g;
  }
  repair_precedence(child);
  return child;
}

void mutate(const Instance& inst, Chromosome& c, double prob, Rng& rng) {
  const auto n = static_cast<std::int64_t>(c.sequence.size());
  if (rng.uniform01() < prob && inst.num_jobs() > 1) {
    // Swap two genes of different jobs.
    for (int attempt = 0; attempt < 32; ++attempt) {
      const auto a = static_cast<std::size_t>(rng.uniform_int(0, n - 1));
      const auto b = static_cast<std::size_t>(rng.uniform_int(0, n - 1));
      if (c.sequence[a].job != c.sequence[b].job) {
        std::swap(c.sequence[a], c.sequence[b]);
        repair_precedence(c.sequence);
        break;
      }
    }
  }
  if (rng.uniform01() < prob) {
    const auto g = static_cast<int>(rng.uniform_int(0, n - 1));
    const auto& el = inst.op(g).eligible();
    c.assignment[static_cast<std::size_t>(g)] =
        el[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(el.size()) - 1))].machine;
  }
}

}  // namespace

void GaConfig::check() const {
  if (population_size < 2) throw ParameterError("GA population_size must be >= 2");
  if (generations < 0) throw ParameterError("GA generations must be >= 0");
  if (crossover_prob < 0.0 || crossover_prob > 1.0) throw ParameterError("GA crossover_prob outside [0,1]");
  if (mutation_prob < 0.0 || mutation_prob > 1.0) throw ParameterError("GA mutation_prob outside [0,1]");
  if (tournament_size < 1) throw ParameterError("GA tournament_size must be >= 1");
}

void repair_precedence(std::vector<OpRef>& sequence) {
  int max_job = -1;
  for (const auto& g : sequence) max_job = std::max(max_job, g.job);
  std::vector<int> next(static_cast<std::size_t>(max_job + 1), 0);
  for (auto& g : sequence) g.pos = next[static_cast<std::size_t>(g.job)]++;
}

ScheduleTrace decode(const Instance& inst, const Chromosome& c) {
  if (static_cast<int>(c.sequence.size()) != inst.num_operations() ||
      static_cast<int>(c.assignment.size()) != inst.num_operations()) {
    throw ContractViolation("decode: chromosome size does not match instance");
  }
  SimState state(inst);
  std::vector<bool> done(c.sequence.size(), false);
  while (!state.is_terminal()) {
    const auto& legal = state.legal_actions();
    std::optional<Action> pick;
    for (std::size_t i = 0; i < c.sequence.size() && !pick; ++i) {
      if (done[i]) continue;
      const OpRef op = c.sequence[i];
      const Action a{op, c.assignment[static_cast<std::size_t>(inst.op_index(op))]};
      if (state.is_legal(a)) {
        pick = a;
        done[i] = true;
      }
    }
    if (!pick) {
      // Assigned machines are all busy: take the first pending op that can start now.
      for (std::size_t i = 0; i < c.sequence.size() && !pick; ++i) {
        if (done[i]) continue;
        const OpRef op = c.sequence[i];
        int best_time = std::numeric_limits<int>::max();
        for (const auto& a : legal) {
          if (a.op != op) continue;
          const int p = *inst.op(op).time_on(a.machine);
          if (p < best_time) {
            best_time = p;
            pick = a;
          }
        }
        if (pick) done[i] = true;
      }
    }
    if (!pick) throw ContractViolation("decode: no dispatchable operation");
    state.apply(*pick);
  }
  return state.trace();
}

GaResult ga_solve(const Instance& inst, const GaConfig& config) {
  config.check();
  Rng rng(config.seed);
  const auto pop_size = static_cast<std::size_t>(config.population_size);
  std::vector<Individual> pop(pop_size);
  for (auto& ind : pop) {
    ind.genes = random_chromosome(inst, rng);
    evaluate(inst, ind);
  }
  auto best_of = [](const std::vector<Individual>& p) {
    return std::min_element(p.begin(), p.end(),
                            [](const Individual& a, const Individual& b) { return a.fitness < b.fitness; });
  };
  GaResult result;
  result.best_history.push_back(best_of(pop)->fitness);
  std::vector<bool> subset(static_cast<std::size_t>(inst.num_jobs()));
  for (int gen = 0; gen < config.generations; ++gen) {
    std::vector<Individual> next;
    next.reserve(pop_size);
    next.push_back(*best_of(pop));  // elitism of one
    while (next.size() < pop_size) {
      Chromosome a = tournament(pop, config.tournament_size, rng).genes;
      Chromosome b = tournament(pop, config.tournament_size, rng).genes;
      if (rng.uniform01() < config.crossover_prob) {
        for (std::size_t j = 0; j < subset.size(); ++j) subset[j] = rng.uniform01() < 0.5;
        auto seq_a = pox(a.sequence, b.sequence, subset);
        auto seq_b = pox(b.sequence, a.sequence, subset);
        a.sequence = std::move(seq_a);
        b.sequence = std::move(seq_b);
        for (std::size_t g = 0; g < a.assignment.size(); ++g) {
          if (rng.uniform01() < 0.5) std::swap(a.assignment[g], b.assignment[g]);
        }
      }
      for (Chromosome* child : {&a, &b}) {
        if (next.size() >= pop_size) break;
        mutate(inst, *child, config.mutation_prob, rng);
        Individual ind;
        ind.genes = std::move(*child);
        evaluate(inst, ind);
        next.push_back(std::move(ind));
      }
    }
    pop = std::move(next);
    result.best_history.push_back(best_of(pop)->fitness);
  }
  const auto best = best_of(pop);
  result.best = best->trace;
  result.best_makespan = best->fitness;
  for (const auto& ind : pop) {
    result.population.push_back(ind.trace);
    result.population_makespans.push_back(ind.fitness);
  }
  return result;
}

}  // namespace cdqac
