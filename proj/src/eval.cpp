#include "cdqac/eval.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

#include "cdqac/errors.hpp"
#include "cdqac/heuristics.hpp"
#include "json_io.hpp"

namespace cdqac {

NetPolicy::NetPolicy(PolicyBundle bundle) : bundle_(std::move(bundle)) {
  if (!bundle_.nets) throw ContractViolation("NetPolicy: bundle has no networks");
}

std::vector<double> NetPolicy::logits(const SimState& state) const {
  ad::NoGradGuard no_grad;
  const FeatureFrame frame = bundle_.norm.apply(extract(state));
  const FeatureFrame* ptr = &frame;
  const BatchGraph g = make_batch(std::span<const FeatureFrame* const>(&ptr, 1));
  const Embeddings e = bundle_.nets->encoder.forward(g);
  const ad::Matrix l = bundle_.nets->actor.logits(e).value();
  return std::vector<double>(l.data(), l.data() + l.size());
}

std::vector<double> NetPolicy::probabilities(const SimState& state) const {
  auto l = logits(state);
  const double mx = *std::max_element(l.begin(), l.end());
  double z = 0.0;
  for (double& v : l) z += (v = std::exp(v - mx));
  for (double& v : l) v /= z;
  return l;
}

Action NetPolicy::greedy(const SimState& state) const {
  const auto l = logits(state);
  std::size_t best = 0;
  for (std::size_t i = 1; i < l.size(); ++i)
    if (l[i] > l[best]) best = i;
  return state.legal_actions()[best];
}

ScheduleTrace rollout_greedy(const NetPolicy& policy, const Instance& instance) {
  return rollout(instance, [&policy](const SimState& s) { return policy.greedy(s); });
}

SamplingResult rollout_sampling(const NetPolicy& policy, const Instance& instance, int k, int repeats,
                                std::uint64_t seed) {
  if (k < 1 || repeats < 1) throw ParameterError("sampling needs k >= 1 and repeats >= 1");
  Rng rng(seed);
  SamplingResult res;
  int best_overall = 0;
  for (int r = 0; r < repeats; ++r) {
    int best = 0;
    for (int i = 0; i < k; ++i) {
      const ScheduleTrace t = rollout(instance, [&](const SimState& s) {
        return s.legal_actions()[rng.categorical(policy.probabilities(s))];
      });
      const int ms = makespan(t, instance);
      if (best == 0 || ms < best) best = ms;
      if (best_overall == 0 || ms < best_overall) {
        best_overall = ms;
        res.best = t;
      }
    }
    res.best_per_repeat.push_back(best);
  }
  double sum = 0.0;
  for (int b : res.best_per_repeat) sum += b;
  res.mean_best = sum / repeats;
  return res;
}

double gap(double c_max, double c_ub) {
  if (!(c_ub > 0.0)) throw ParameterError("gap: upper bound must be positive");
  return (c_max - c_ub) / c_ub * 100.0;
}

std::optional<double> UbTable::find(const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end()) {
    // Fall back to the name without its file extension.
    const auto dot = name.find_last_of('.');
    if (dot != std::string::npos && dot > 0) it = values.find(name.substr(0, dot));
  }
  if (it == values.end()) return std::nullopt;
  return it->second;
}

UbTable parse_ub_table(const std::string& text) {
  UbTable t;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string name;
    if (!(ls >> name) || name[0] == '#') continue;
    double v = 0.0;
    if (!(ls >> v)) throw ParseError(line_no, "expected `name value`");
    if (!(v > 0.0)) throw ParseError(line_no, "upper bound must be positive");
    std::string extra;
    if (ls >> extra) throw ParseError(line_no, "trailing tokens");
    t.values[name] = v;
  }
  return t;
}

UbTable load_ub_table(const std::filesystem::path& path) { return parse_ub_table(read_text(path)); }

std::vector<MethodSummary> summarize(const std::vector<EvalRow>& rows) {
  std::vector<MethodSummary> out;
  auto slot = [&](const std::string& m) -> MethodSummary& {
    for (auto& s : out)
      if (s.method == m) return s;
    out.push_back(MethodSummary{m});
    return out.back();
  };
  for (const auto& r : rows) {
    auto& s = slot(r.method);
    s.rows += 1;
    s.mean_makespan += r.makespan;
    s.mean_seconds += r.seconds;
    if (r.gap) {
      s.gap_rows += 1;
      s.mean_gap += *r.gap;
    }
  }
  for (auto& s : out) {
    s.mean_makespan /= s.rows;
    s.mean_seconds /= s.rows;
    if (s.gap_rows > 0) s.mean_gap /= s.gap_rows;
  }
  for (const auto& r : rows) {
    if (!r.gap) continue;
    auto& s = slot(r.method);
    s.std_gap += (*r.gap - s.mean_gap) * (*r.gap - s.mean_gap);
  }
  for (auto& s : out) s.std_gap = s.gap_rows > 0 ? std::sqrt(s.std_gap / s.gap_rows) : 0.0;
  return out;
}

EvalReport benchmark_sweep(const std::optional<PolicyBundle>& bundle, const std::vector<Instance>& instances,
                           const UbTable& ub, const SweepOptions& options) {
  for (const auto& m : options.methods) {
    const bool net = m == "greedy" || m == "sampling";
    if (net && !bundle) throw ParameterError("method '" + m + "' needs a policy bundle");
    if (!net && m != "ga" && m != "random" && m.rfind("pdr:", 0) != 0) {
      throw ParameterError("unknown evaluation method '" + m + "'");
    }
    if (m.rfind("pdr:", 0) == 0) PdrSpec::parse(m.substr(4));
  }
  std::optional<NetPolicy> policy;
  if (bundle) policy.emplace(*bundle);

  const int n = static_cast<int>(instances.size());
  const std::size_t per = options.methods.size();
  std::vector<EvalRow> rows(static_cast<std::size_t>(n) * per);
  const Rng root(options.seed);

  auto run = [&](int i) {
    const Instance& inst = instances[static_cast<std::size_t>(i)];
    const std::uint64_t seed = root.split(static_cast<std::uint64_t>(i)).next_u64();
    for (std::size_t mi = 0; mi < per; ++mi) {
      const std::string& m = options.methods[mi];
      EvalRow row;
      row.instance = inst.name();
      row.method = m;
      const auto t0 = std::chrono::steady_clock::now();
      std::vector<ScheduleTrace> traces;
      if (m == "greedy") {
        traces.push_back(rollout_greedy(*policy, inst));
        row.makespan = makespan(traces.back(), inst);
      } else if (m == "sampling") {
        const auto res = rollout_sampling(*policy, inst, options.k, options.repeats, seed);
        traces.push_back(res.best);
        row.makespan = res.mean_best;
      } else if (m == "ga") {
        GaConfig cfg = options.ga;
        cfg.seed = seed;
        const auto res = ga_solve(inst, cfg);
        traces.push_back(res.best);
        row.makespan = res.best_makespan;
      } else if (m == "random") {
        traces.push_back(rollout(inst, random_policy(seed)));
        row.makespan = makespan(traces.back(), inst);
      } else {
        traces.push_back(rollout(inst, pdr_policy(PdrSpec::parse(m.substr(4)))));
        row.makespan = makespan(traces.back(), inst);
      }
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      for (const auto& t : traces) row.valid = row.valid && validate(t, inst).empty();
      if (const auto c = ub.find(inst.name())) row.gap = gap(row.makespan, *c);
      rows[static_cast<std::size_t>(i) * per + mi] = std::move(row);
    }
  };

  const int jobs = std::max(1, std::min(options.jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) run(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int i = next++; i < n; i = next++) run(i);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  EvalReport report;
  report.rows = std::move(rows);
  report.summary = summarize(report.rows);
  return report;
}

void write_report(const EvalReport& report, const std::filesystem::path& out) {
  std::ostringstream lines;
  for (const auto& r : report.rows) {
    Json j{{"instance", r.instance}, {"method", r.method}, {"makespan", r.makespan},
           {"seconds", r.seconds},   {"valid", r.valid}};
    j["gap"] = r.gap ? Json(*r.gap) : Json(nullptr);
    lines << j.dump() << '\n';
  }
  write_text(out.string() + ".jsonl", lines.str());
  Json summary = Json::array();
  for (const auto& s : report.summary) {
    summary.push_back({{"method", s.method},
                       {"rows", s.rows},
                       {"gap_rows", s.gap_rows},
                       {"mean_makespan", s.mean_makespan},
                       {"mean_gap", s.mean_gap},
                       {"std_gap", s.std_gap},
                       {"mean_seconds", s.mean_seconds}});
  }
  write_text(out.string() + ".summary.json", summary.dump(2) + "\n");
}

}  // namespace cdqac
