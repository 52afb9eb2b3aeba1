#include "cdqac/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "cdqac/errors.hpp"
#include "json_io.hpp"

namespace cdqac {

namespace fs = std::filesystem;

std::string to_string(Recipe r) {
  switch (r) {
    case Recipe::pdr: return "pdr";
    case Recipe::ga: return "ga";
    case Recipe::pdr_ga: return "pdr-ga";
    case Recipe::random: return "random";
  }
  return "?";
}

Recipe parse_recipe(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "pdr") return Recipe::pdr;
  if (s == "ga") return Recipe::ga;
  if (s == "pdr-ga" || s == "pdr_ga") return Recipe::pdr_ga;
  if (s == "random") return Recipe::random;
  throw ParameterError("unknown recipe '" + std::string(text) + "'");
}

Dataset::Dataset(std::vector<Instance> instances, std::vector<Trajectory> trajectories, DatasetManifest manifest)
    : instances_(std::move(instances)), trajectories_(std::move(trajectories)), manifest_(std::move(manifest)) {
  index();
}

void Dataset::index() {
  transitions_.clear();
  for (std::size_t ti = 0; ti < trajectories_.size(); ++ti) {
    const Trajectory& tr = trajectories_[ti];
    if (tr.instance < 0 || tr.instance >= static_cast<int>(instances_.size())) {
      throw ContractViolation("trajectory refers to an unknown instance");
    }
    const int n = static_cast<int>(tr.actions.size());
    for (int i = 0; i < n; ++i) {
      Transition t;
      t.trajectory = static_cast<int>(ti);
      t.step = i;
      t.instance = tr.instance;
      t.action = tr.actions[static_cast<std::size_t>(i)];
      t.reward = tr.rewards[static_cast<std::size_t>(i)];
      t.terminal = i + 1 == n;
      transitions_.push_back(t);
    }
  }
  manifest_.trajectories = static_cast<long>(trajectories_.size());
  manifest_.transitions = static_cast<long>(transitions_.size());
}

const FeatureFrame& Dataset::state(const Transition& t) const {
  const auto& frames = trajectories_.at(static_cast<std::size_t>(t.trajectory)).frames;
  if (frames.empty()) throw ContractViolation("dataset was built without features");
  return frames.at(static_cast<std::size_t>(t.step));
}

const FeatureFrame& Dataset::next_state(const Transition& t) const {
  if (t.terminal) throw ContractViolation("terminal transition has no next state");
  const auto& frames = trajectories_.at(static_cast<std::size_t>(t.trajectory)).frames;
  if (frames.empty()) throw ContractViolation("dataset was built without features");
  return frames.at(static_cast<std::size_t>(t.step) + 1);
}

Trajectory record_trajectory(const Instance& instance, int instance_index, const ScheduleTrace& trace,
                             std::string source, bool with_features) {
  Trajectory tr;
  tr.instance = instance_index;
  tr.source = std::move(source);
  SimState s(instance);
  for (const auto& step : trace.steps) {
    const auto& legal = s.legal_actions();
    const auto it = std::find(legal.begin(), legal.end(), step.action);
    if (it == legal.end()) throw ContractViolation("record_trajectory: trace step is not a legal action");
    if (with_features) tr.frames.push_back(extract(s));
    tr.actions.push_back(static_cast<int>(it - legal.begin()));
    tr.rewards.push_back(s.apply(step.action));
  }
  if (!s.is_terminal()) throw ContractViolation("record_trajectory: incomplete trace");
  tr.trace = s.trace();
  if (!(tr.trace == trace)) throw ContractViolation("record_trajectory: trace does not replay to itself");
  tr.makespan = s.partial_makespan();
  return tr;
}

std::vector<std::pair<std::string, ScheduleTrace>> behavior_solutions(const Instance& instance, Recipe recipe,
                                                                      const BuildOptions& options,
                                                                      std::uint64_t instance_seed) {
  std::vector<std::pair<std::string, ScheduleTrace>> out;
  if (recipe == Recipe::pdr || recipe == Recipe::pdr_ga) {
    for (const auto& spec : all_pdrs(instance.kind())) out.emplace_back(spec.name(), rollout(instance, pdr_policy(spec)));
  }
  if (recipe == Recipe::ga || recipe == Recipe::pdr_ga) {
    GaConfig cfg = options.ga;
    cfg.seed = splitmix64(instance_seed ^ 0x6761ULL);
    auto res = ga_solve(instance, cfg);
    for (auto& t : res.population) out.emplace_back("ga", std::move(t));
  }
  if (recipe == Recipe::random) {
    if (options.random_per_instance < 1) throw ParameterError("random_per_instance must be positive");
    Rng rng(instance_seed);
    for (int r = 0; r < options.random_per_instance; ++r) {
      out.emplace_back("random", rollout(instance, random_policy(rng.next_u64())));
    }
  }
  return out;
}

namespace {

int nominal_solutions(Recipe recipe, ProblemKind kind, const BuildOptions& options) {
  const int pdrs = static_cast<int>(all_pdrs(kind).size());
  switch (recipe) {
    case Recipe::pdr: return pdrs;
    case Recipe::ga: return options.ga.population_size;
    case Recipe::pdr_ga: return pdrs + options.ga.population_size;
    case Recipe::random: return options.random_per_instance;
  }
  return 0;
}

std::vector<int> dedup_key(const ScheduleTrace& t) {
  std::vector<int> key;
  key.reserve(t.steps.size() * 4);
  for (const auto& s : t.steps) {
    key.push_back(s.action.op.job);
    key.push_back(s.action.op.pos);
    key.push_back(s.action.machine);
    key.push_back(s.start);
  }
  return key;
}

NormStats fit_on(const std::vector<Trajectory>& trajectories) {
  std::vector<const FeatureFrame*> frames;
  for (const auto& tr : trajectories)
    for (const auto& f : tr.frames) frames.push_back(&f);
  if (frames.empty()) return NormStats::identity();
  return fit_normalizer(frames);
}

template <class Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  std::vector<std::thread> pool;
  for (int w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

Dataset build_dataset(const std::vector<Instance>& instances, const BuildOptions& options) {
  if (instances.empty()) throw ParameterError("build_dataset: empty instance list");
  options.ga.check();
  const int n = static_cast<int>(instances.size());
  std::vector<std::vector<Trajectory>> per_instance(static_cast<std::size_t>(n));
  std::vector<int> before(static_cast<std::size_t>(n), 0);
  const Rng root(options.seed);

  parallel_for(n, options.jobs, [&](int i) {
    const Instance& inst = instances[static_cast<std::size_t>(i)];
    const std::uint64_t seed = root.split(static_cast<std::uint64_t>(i)).next_u64();
    auto solutions = behavior_solutions(inst, options.recipe, options, seed);
    before[static_cast<std::size_t>(i)] = static_cast<int>(solutions.size());
    std::set<std::vector<int>> seen;
    auto& out = per_instance[static_cast<std::size_t>(i)];
    for (auto& [source, trace] : solutions) {
      if (!seen.insert(dedup_key(trace)).second) continue;
      out.push_back(record_trajectory(inst, i, trace, source, options.with_features));
    }
  });

  DatasetManifest m;
  m.recipe = options.recipe;
  m.seed = options.seed;
  m.solutions_per_instance = nominal_solutions(options.recipe, instances.front().kind(), options);
  m.has_features = options.with_features;
  std::vector<Trajectory> all;
  for (int i = 0; i < n; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    m.instance_names.push_back(instances[iu].name());
    m.dedup.before_per_instance.push_back(before[iu]);
    m.dedup.after_per_instance.push_back(static_cast<int>(per_instance[iu].size()));
    m.dedup.before += before[iu];
    m.dedup.after += static_cast<long>(per_instance[iu].size());
    for (auto& t : per_instance[iu]) all.push_back(std::move(t));
  }
  m.norm = fit_on(all);
  return Dataset(instances, std::move(all), std::move(m));
}

Dataset subset(const Dataset& dataset, const SubsetSpec& spec) {
  if (spec.fraction.has_value() == spec.count.has_value()) {
    throw ParameterError("subset: give exactly one of fraction or count");
  }
  if (spec.fraction && !(*spec.fraction > 0.0 && *spec.fraction <= 1.0)) {
    throw ParameterError("subset: fraction must be in (0, 1]");
  }
  if (spec.count && *spec.count < 1) throw ParameterError("subset: count must be positive");
  Rng rng(spec.seed);
  const int n_inst = static_cast<int>(dataset.instances().size());
  auto pick = [&](int total) {
    long k = spec.fraction ? std::llround(*spec.fraction * total) : *spec.count;
    return static_cast<int>(std::clamp<long>(k, 0, total));
  };

  std::vector<Instance> instances;
  std::vector<Trajectory> trajectories;
  DatasetManifest m = dataset.manifest();
  m.instance_names.clear();
  m.dedup.after_per_instance.clear();
  m.dedup.before_per_instance.clear();

  std::vector<std::vector<int>> by_instance(static_cast<std::size_t>(n_inst));
  for (std::size_t t = 0; t < dataset.trajectories().size(); ++t) {
    by_instance[static_cast<std::size_t>(dataset.trajectories()[t].instance)].push_back(static_cast<int>(t));
  }

  std::vector<int> keep_instances(static_cast<std::size_t>(n_inst));
  for (int i = 0; i < n_inst; ++i) keep_instances[static_cast<std::size_t>(i)] = i;
  if (spec.axis == SubsetAxis::instances) {
    rng.shuffle(keep_instances);
    keep_instances.resize(static_cast<std::size_t>(pick(n_inst)));
    std::sort(keep_instances.begin(), keep_instances.end());
  }

  for (int old : keep_instances) {
    auto trajs = by_instance[static_cast<std::size_t>(old)];
    if (spec.axis == SubsetAxis::solutions) {
      Rng local = rng.split(static_cast<std::uint64_t>(old));
      local.shuffle(trajs);
      trajs.resize(static_cast<std::size_t>(pick(static_cast<int>(trajs.size()))));
      std::sort(trajs.begin(), trajs.end());
      if (trajs.empty()) continue;
    }
    const int idx = static_cast<int>(instances.size());
    instances.push_back(dataset.instances()[static_cast<std::size_t>(old)]);
    m.instance_names.push_back(dataset.manifest().instance_names[static_cast<std::size_t>(old)]);
    const auto& old_before = dataset.manifest().dedup.before_per_instance;
    m.dedup.before_per_instance.push_back(old_before.empty() ? 0 : old_before[static_cast<std::size_t>(old)]);
    m.dedup.after_per_instance.push_back(static_cast<int>(trajs.size()));
    for (int t : trajs) {
      Trajectory tr = dataset.trajectories()[static_cast<std::size_t>(t)];
      tr.instance = idx;
      trajectories.push_back(std::move(tr));
    }
  }
  if (trajectories.empty()) throw ParameterError("subset: result is empty");
  m.dedup.before = 0;
  for (int b : m.dedup.before_per_instance) m.dedup.before += b;
  m.dedup.after = static_cast<long>(trajectories.size());
  if (m.has_features) m.norm = fit_on(trajectories);
  return Dataset(std::move(instances), std::move(trajectories), std::move(m));
}

namespace {

struct PairHash {
  std::size_t operator()(const std::pair<std::uint64_t, std::uint64_t>& p) const {
    return static_cast<std::size_t>(splitmix64(p.first ^ splitmix64(p.second)));
  }
};

// Keys of every (state, action) visited by the dataset's trajectories.
std::unordered_set<std::pair<std::uint64_t, std::uint64_t>, PairHash> state_action_keys(const Dataset& d) {
  std::unordered_set<std::pair<std::uint64_t, std::uint64_t>, PairHash> keys;
  std::vector<std::array<int, 5>> scheduled;
  for (const auto& tr : d.trajectories()) {
    const std::uint64_t inst_hash = d.instances()[static_cast<std::size_t>(tr.instance)].content_hash();
    scheduled.clear();
    for (const auto& step : tr.trace.steps) {
      // Decision time of this step equals its start under non-delay dispatch.
      auto sorted = scheduled;
      std::sort(sorted.begin(), sorted.end());
      Fnv1a h;
      h.add(static_cast<std::int64_t>(inst_hash));
      h.add(step.start);
      for (const auto& r : sorted)
        for (int v : r) h.add(v);
      Fnv1a a;
      a.add(step.action.op.job);
      a.add(step.action.op.pos);
      a.add(step.action.machine);
      keys.emplace(h.value(), a.value());
      scheduled.push_back({step.action.op.job, step.action.op.pos, step.action.machine, step.start, step.end});
    }
  }
  return keys;
}

}  // namespace

long unique_state_actions(const Dataset& dataset) { return static_cast<long>(state_action_keys(dataset).size()); }

double saco(const Dataset& dataset, const Dataset& reference) {
  const long ref = unique_state_actions(reference);
  if (ref == 0) throw ParameterError("saco: reference has no state-action pairs");
  return static_cast<double>(unique_state_actions(dataset)) / static_cast<double>(ref);
}

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

MakespanHistogram makespan_histogram(const Dataset& dataset, int bins) {
  if (bins < 1) throw ParameterError("makespan_histogram: bins must be positive");
  std::vector<int> best(dataset.instances().size(), 0);
  for (const auto& tr : dataset.trajectories()) {
    int& b = best[static_cast<std::size_t>(tr.instance)];
    b = b == 0 ? tr.makespan : std::min(b, tr.makespan);
  }
  MakespanHistogram h;
  for (const auto& tr : dataset.trajectories()) {
    h.values.push_back(static_cast<double>(best[static_cast<std::size_t>(tr.instance)]) / tr.makespan);
  }
  for (int b = 0; b <= bins; ++b) h.edges.push_back(static_cast<double>(b) / bins);
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double v : h.values) {
    const int b = std::clamp(static_cast<int>(std::floor(v * bins)), 0, bins - 1);
    h.counts[static_cast<std::size_t>(b)] += 1;
  }
  auto sorted = h.values;
  std::sort(sorted.begin(), sorted.end());
  h.q1 = quantile(sorted, 0.25);
  h.median = quantile(sorted, 0.5);
  h.q3 = quantile(sorted, 0.75);
  return h;
}

std::vector<Transition> sample_batch(const Dataset& dataset, int batch_size, Rng& rng) {
  const long n = dataset.num_transitions();
  if (n == 0) throw ParameterError("sample_batch: empty dataset");
  if (batch_size < 1 || batch_size > n) throw ParameterError("sample_batch: batch size must be in [1, dataset size]");
  std::vector<Transition> out;
  out.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) out.push_back(dataset.transition(rng.uniform_int(0, n - 1)));
  return out;
}

namespace {

constexpr const char* kDatasetFormat = "cdqac-dataset";
constexpr int kDatasetVersion = 1;

std::string instance_file(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu.txt", i);
  return buf;
}

}  // namespace

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir / "instances");
  const auto& m = dataset.manifest();
  Json insts = Json::array();
  for (std::size_t i = 0; i < dataset.instances().size(); ++i) {
    const Instance& inst = dataset.instances()[i];
    write_text(dir / "instances" / instance_file(i), serialize(inst));
    insts.push_back({{"name", m.instance_names[i]}, {"kind", to_string(inst.kind())}, {"file", "instances/" + instance_file(i)}});
  }
  Json manifest{{"format", kDatasetFormat},
                {"version", kDatasetVersion},
                {"recipe", to_string(m.recipe)},
                {"seed", m.seed},
                {"solutions_per_instance", m.solutions_per_instance},
                {"instances", insts},
                {"dedup",
                 {{"before", m.dedup.before},
                  {"after", m.dedup.after},
                  {"before_per_instance", m.dedup.before_per_instance},
                  {"after_per_instance", m.dedup.after_per_instance}}},
                {"norm", to_json(m.norm)},
                {"has_features", m.has_features},
                {"trajectories", m.trajectories},
                {"transitions", m.transitions}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");

  std::ostringstream records;
  for (const auto& tr : dataset.trajectories()) {
    Json frames = Json::array();
    for (const auto& f : tr.frames) frames.push_back(to_json(f));
    Json rec{{"instance", tr.instance}, {"source", tr.source},   {"trace", to_json(tr.trace)},
             {"actions", tr.actions},   {"rewards", tr.rewards}, {"makespan", tr.makespan},
             {"frames", frames}};
    records << rec.dump() << '\n';
  }
  write_text(dir / "records.jsonl", records.str());
}

Dataset load_dataset(const fs::path& dir) {
  try {
    const Json manifest = Json::parse(read_text(dir / "manifest.json"));
    if (require(manifest, "format").get<std::string>() != kDatasetFormat) throw ParseError(0, "not a dataset manifest");
    if (require(manifest, "version").get<int>() != kDatasetVersion) throw ParseError(0, "unsupported dataset version");
    DatasetManifest m;
    m.recipe = parse_recipe(require(manifest, "recipe").get<std::string>());
    m.seed = require(manifest, "seed").get<std::uint64_t>();
    m.solutions_per_instance = require(manifest, "solutions_per_instance").get<int>();
    std::vector<Instance> instances;
    for (const auto& e : require(manifest, "instances")) {
      Instance inst = parse_instance(read_text(dir / require(e, "file").get<std::string>()),
                                     parse_problem_kind(require(e, "kind").get<std::string>()));
      inst.set_name(require(e, "name").get<std::string>());
      m.instance_names.push_back(inst.name());
      instances.push_back(std::move(inst));
    }
    const Json& dd = require(manifest, "dedup");
    m.dedup.before = require(dd, "before").get<long>();
    m.dedup.after = require(dd, "after").get<long>();
    require(dd, "before_per_instance").get_to(m.dedup.before_per_instance);
    require(dd, "after_per_instance").get_to(m.dedup.after_per_instance);
    m.norm = norm_from_json(require(manifest, "norm"));
    m.has_features = require(manifest, "has_features").get<bool>();

    std::vector<Trajectory> trajectories;
    std::istringstream records(read_text(dir / "records.jsonl"));
    std::string line;
    int line_no = 0;
    while (std::getline(records, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        const Json rec = Json::parse(line);
        Trajectory tr;
        tr.instance = require(rec, "instance").get<int>();
        tr.source = require(rec, "source").get<std::string>();
        tr.trace = trace_from_json(require(rec, "trace"));
        require(rec, "actions").get_to(tr.actions);
        require(rec, "rewards").get_to(tr.rewards);
        tr.makespan = require(rec, "makespan").get<int>();
        for (const auto& f : require(rec, "frames")) tr.frames.push_back(frame_from_json(f));
        if (tr.actions.size() != tr.trace.steps.size() || tr.rewards.size() != tr.trace.steps.size() ||
            (!tr.frames.empty() && tr.frames.size() != tr.trace.steps.size())) {
          throw ParseError(line_no, "record arrays disagree in length");
        }
        trajectories.push_back(std::move(tr));
      } catch (const ParseError& e) {
        if (e.line() != 0) throw;
        throw ParseError(line_no, e.what());
      } catch (const Json::exception& e) {
        throw ParseError(line_no, e.what());
      }
    }
    Dataset d(std::move(instances), std::move(trajectories), m);
    if (d.manifest().trajectories != require(manifest, "trajectories").get<long>() ||
        d.manifest().transitions != require(manifest, "transitions").get<long>()) {
      throw ParseError(0, "manifest counts do not match the stored records");
    }
    return d;
  } catch (const Json::exception& e) {
    throw ParseError(0, std::string("dataset manifest: ") + e.what());
  }
}

}  // namespace cdqac
