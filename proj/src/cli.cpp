#include "cdqac/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "cdqac/autodiff/gradcheck.hpp"
#include "cdqac/dataset.hpp"
#include "cdqac/errors.hpp"
#include "cdqac/eval.hpp"
#include "cdqac/heuristics.hpp"
#include "cdqac/trainer.hpp"
#include "json_io.hpp"

namespace cdqac {

namespace fs = std::filesystem;

std::vector<Instance> load_instance_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension().string();
    if (ext == ".json" || ext == ".jsonl") continue;
    files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Instance> out;
  for (const auto& f : files) out.push_back(load_instance(f.string()));
  if (out.empty()) throw IoError("no instance files in " + dir.string());
  return out;
}

namespace {

constexpr const char* kVersion = "0.1.0";

std::string timestamp() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

// Written next to every artifact so the run can be repeated from it alone.
void write_run_manifest(const fs::path& file, const std::vector<std::string>& args, const Json& config,
                        std::uint64_t seed, const Json& inputs, const Json& outputs) {
  Json j{{"command", args.empty() ? "" : args.front()},
         {"argv", args},
         {"config", config},
         {"seed", seed},
         {"version", kVersion},
         {"inputs", inputs},
         {"outputs", outputs},
         {"timestamp", timestamp()}};
  write_text(file, j.dump(2) + "\n");
}

fs::path resolve_out(const std::string& out, const std::string& fallback) {
  if (!out.empty()) return out;
  if (const char* root = std::getenv("CDQAC_OUT_ROOT")) return fs::path(root) / fallback;
  throw ParameterError("--out is required (or set CDQAC_OUT_ROOT)");
}

fs::path sidecar(const fs::path& out) { return fs::path(out.string() + ".run_manifest.json"); }

GaConfig ga_from(int pop, int gens, std::uint64_t seed) {
  GaConfig g;
  g.population_size = pop;
  g.generations = gens;
  g.seed = seed;
  g.check();
  return g;
}

struct Context {
  std::vector<std::string> args;
  std::ostream& out;
  std::ostream& err;
};

int cmd_gen_instances(const Context& c, const std::string& kind_s, int n, int m, int count, std::uint64_t seed,
                      int p_lo, int p_hi, const std::string& out_s) {
  const ProblemKind kind = parse_problem_kind(kind_s);
  if (count < 1) throw ParameterError("--count must be positive");
  const fs::path out = resolve_out(out_s, "instances");
  fs::create_directories(out);
  const Rng root(seed);
  Json files = Json::array();
  for (int i = 0; i < count; ++i) {
    const std::uint64_t s = root.split(static_cast<std::uint64_t>(i)).next_u64();
    const Instance inst = kind == ProblemKind::fjsp ? generate_fjsp(n, m, s, p_lo, p_hi) : generate_jsp(n, m, s, p_lo, p_hi);
    char name[96];
    std::snprintf(name, sizeof name, "%s_%dx%d_%04d.%s", kind_s.c_str(), n, m, i,
                  kind == ProblemKind::fjsp ? "fjs" : "txt");
    save_instance(inst, (out / name).string());
    files.push_back(name);
  }
  write_run_manifest(out / "run_manifest.json", c.args,
                     {{"kind", kind_s}, {"n", n}, {"m", m}, {"count", count}, {"p_lo", p_lo}, {"p_hi", p_hi}}, seed,
                     Json::array(), files);
  c.out << "wrote " << count << " instances to " << out.string() << '\n';
  return 0;
}

int cmd_gen_dataset(const Context& c, const std::string& recipe, const std::string& inst_dir, int per_instance,
                    std::uint64_t seed, const std::string& out_s, int jobs, bool no_features, int ga_pop, int ga_gens) {
  BuildOptions o;
  o.recipe = parse_recipe(recipe);
  o.seed = seed;
  o.random_per_instance = per_instance;
  o.with_features = !no_features;
  o.jobs = jobs;
  o.ga = ga_from(ga_pop, ga_gens, seed);
  const auto instances = load_instance_dir(inst_dir);
  const fs::path out = resolve_out(out_s, "dataset");
  const Dataset d = build_dataset(instances, o);
  save_dataset(d, out);
  write_run_manifest(out / "run_manifest.json", c.args,
                     {{"recipe", to_string(o.recipe)},
                      {"per_instance", per_instance},
                      {"features", o.with_features},
                      {"ga_population", ga_pop},
                      {"ga_generations", ga_gens},
                      {"jobs", jobs}},
                     seed, {inst_dir}, {"manifest.json", "records.jsonl", "instances/"});
  c.out << "trajectories " << d.manifest().trajectories << " (before dedup " << d.manifest().dedup.before
        << ")\ntransitions " << d.manifest().transitions << '\n';
  return 0;
}

int cmd_solve(const Context& c, const std::string& inst_path, const std::string& method, const std::string& bundle_path,
              std::uint64_t seed, const std::string& out_s, int ga_pop, int ga_gens, int k, int repeats) {
  const Instance inst = load_instance(inst_path);
  ScheduleTrace trace;
  if (method.rfind("pdr:", 0) == 0) {
    trace = rollout(inst, pdr_policy(PdrSpec::parse(method.substr(4))));
  } else if (method == "ga") {
    trace = ga_solve(inst, ga_from(ga_pop, ga_gens, seed)).best;
  } else if (method == "random") {
    trace = rollout(inst, random_policy(seed));
  } else if (method == "greedy" || method == "sampling") {
    if (bundle_path.empty()) throw ParameterError("--bundle is required for " + method);
    const NetPolicy policy(load_bundle(bundle_path));
    trace = method == "greedy" ? rollout_greedy(policy, inst) : rollout_sampling(policy, inst, k, repeats, seed).best;
  } else {
    throw ParameterError("unknown method '" + method + "'");
  }
  const auto violations = validate(trace, inst);
  if (!violations.empty()) throw ContractViolation("produced an invalid schedule: " + violations.front().detail);
  c.out << "makespan " << makespan(trace, inst) << '\n';
  if (!out_s.empty()) {
    write_text(out_s, export_trace(trace));
    write_run_manifest(sidecar(out_s), c.args,
                       {{"method", method}, {"bundle", bundle_path}, {"ga_population", ga_pop},
                        {"ga_generations", ga_gens}, {"k", k}, {"repeats", repeats}},
                       seed, {inst_path}, {out_s});
  }
  return 0;
}

int cmd_train(const Context& c, const std::string& dataset_dir, const std::string& config_path, CLI::App& sub,
              std::uint64_t seed, long steps, int batch, const std::string& out_s) {
  TrainConfig cfg;
  if (!config_path.empty()) cfg = train_config_from_json_text(read_text(config_path), cfg);
  if (sub.count("--seed")) cfg.seed = seed;
  if (sub.count("--steps")) cfg.steps = steps;
  if (sub.count("--batch-size")) cfg.batch_size = batch;
  cfg.check();
  const fs::path out = resolve_out(out_s, "train");
  const Dataset d = load_dataset(dataset_dir);
  TrainOptions o;
  o.out_dir = out;
  const long every = std::max<long>(1, cfg.steps / 10);
  o.on_step = [&](const TrainRecord& r) {
    if (r.step % every == 0) {
      c.out << "step " << r.step << " critic " << r.critic_loss << " td " << r.td_loss << " cql " << r.cql_loss
            << " q " << r.q_mean << '\n';
    }
  };
  const TrainResult res = train(d, cfg, o);
  write_run_manifest(out / "run_manifest.json", c.args, Json::parse(train_config_to_json_text(cfg)), cfg.seed,
                     {dataset_dir, config_path}, {"bundle.json", "train_log.jsonl"});
  c.out << "actor updates " << res.actor_updates << "\nbundle " << (out / "bundle.json").string() << '\n';
  return 0;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_eval(const Context& c, const std::string& bundle_path, const std::string& inst_dir, const std::string& ub_path,
             const std::string& mode, int k, int repeats, std::uint64_t seed, const std::string& out_s,
             const std::string& extra, int jobs, int ga_pop, int ga_gens) {
  SweepOptions o;
  o.methods.clear();
  if (!mode.empty()) {
    if (mode != "greedy" && mode != "sampling") throw ParameterError("--mode must be greedy or sampling");
    o.methods.push_back(mode);
  }
  for (auto& m : split_list(extra)) o.methods.push_back(m);
  if (o.methods.empty()) throw ParameterError("nothing to evaluate");
  o.k = k;
  o.repeats = repeats;
  o.seed = seed;
  o.jobs = jobs;
  o.ga = ga_from(ga_pop, ga_gens, seed);
  std::optional<PolicyBundle> bundle;
  if (!bundle_path.empty()) bundle = load_bundle(bundle_path);
  const UbTable ub = ub_path.empty() ? UbTable{} : load_ub_table(ub_path);
  const auto instances = load_instance_dir(inst_dir);
  const fs::path out = resolve_out(out_s, "report");
  const EvalReport report = benchmark_sweep(bundle, instances, ub, o);
  write_report(report, out);
  write_run_manifest(sidecar(out), c.args,
                     {{"methods", o.methods}, {"k", k}, {"repeats", repeats}, {"jobs", jobs},
                      {"ga_population", ga_pop}, {"ga_generations", ga_gens}},
                     seed, {bundle_path, inst_dir, ub_path}, {out.string() + ".jsonl", out.string() + ".summary.json"});
  for (const auto& s : report.summary) {
    c.out << s.method << ": mean makespan " << s.mean_makespan;
    if (s.gap_rows > 0) c.out << ", mean gap " << s.mean_gap << "% +- " << s.std_gap;
    c.out << ", mean time " << s.mean_seconds << "s over " << s.rows << " instances\n";
  }
  for (const auto& r : report.rows) {
    if (!r.valid) {
      c.err << "invalid schedule for " << r.instance << " (" << r.method << ")\n";
      return 1;
    }
  }
  return 0;
}

int cmd_analyze(const Context& c, const std::string& ref_dir, const std::string& target_dir, int bins,
                const std::string& out_s) {
  const Dataset ref = load_dataset(ref_dir);
  const Dataset target = load_dataset(target_dir);
  const double ratio = saco(target, ref);
  const auto hist = makespan_histogram(target, bins);
  c.out << "saco " << std::setprecision(6) << ratio << '\n';
  c.out << "unique_pairs target " << unique_state_actions(target) << " reference " << unique_state_actions(ref) << '\n';
  c.out << "normalized makespan median " << hist.median << " iqr " << hist.iqr() << '\n';
  if (!out_s.empty()) {
    Json j{{"saco", ratio},
           {"unique_target", unique_state_actions(target)},
           {"unique_reference", unique_state_actions(ref)},
           {"histogram", {{"edges", hist.edges}, {"counts", hist.counts}}},
           {"quartiles", {hist.q1, hist.median, hist.q3}}};
    write_text(out_s, j.dump(2) + "\n");
    write_run_manifest(sidecar(out_s), c.args, {{"bins", bins}}, 0, {ref_dir, target_dir}, {out_s});
  }
  return 0;
}

int cmd_gradcheck(const Context& c, std::uint64_t seed, double tol) {
  bool ok = true;
  for (const auto& p : ad::check_primitives(seed)) {
    const bool pass = p.result.max_rel_error < tol;
    ok = ok && pass;
    c.out << std::left << std::setw(20) << p.name << ' ' << std::scientific << std::setprecision(3)
          << p.result.max_rel_error << (pass ? "" : "  FAIL") << '\n';
  }
  c.out << (ok ? "all primitives within tolerance\n" : "gradient check failed\n");
  return ok ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Offline RL scheduling toolkit", "cdqac"};
  app.require_subcommand(1);
  Context ctx{args, out, err};

  std::string kind = "fjsp", out_s, recipe = "pdr", inst_dir, inst_path, method, bundle, config, ub, mode = "greedy",
              extra, ref_dir, target_dir;
  int n = 10, m = 5, count = 100, p_lo = 1, p_hi = 99, per_instance = 100, jobs = 1, ga_pop = 200, ga_gens = 100,
      k = 100, repeats = 3, batch = 256, bins = 20;
  long steps = 200000;
  std::uint64_t seed = 1;
  double tol = 1e-4;
  bool no_features = false;

  auto* gi = app.add_subcommand("gen-instances", "Generate random instances");
  gi->add_option("--kind", kind, "fjsp or jsp")->capture_default_str();
  gi->add_option("--n", n, "jobs per instance")->capture_default_str();
  gi->add_option("--m", m, "machines")->capture_default_str();
  gi->add_option("--count", count)->capture_default_str();
  gi->add_option("--p-lo", p_lo)->capture_default_str();
  gi->add_option("--p-hi", p_hi)->capture_default_str();
  gi->add_option("--seed", seed)->capture_default_str();
  gi->add_option("--out", out_s, "output directory");

  auto* gd = app.add_subcommand("gen-dataset", "Build an offline dataset from behavior policies");
  gd->add_option("--recipe", recipe, "pdr, ga, pdr-ga or random")->capture_default_str();
  gd->add_option("--instances", inst_dir)->required();
  gd->add_option("--per-instance", per_instance, "random rollouts per instance")->capture_default_str();
  gd->add_option("--seed", seed)->capture_default_str();
  gd->add_option("--out", out_s);
  gd->add_option("--jobs", jobs)->capture_default_str();
  gd->add_flag("--no-features", no_features, "skip feature frames (analysis only)");
  gd->add_option("--ga-pop", ga_pop)->capture_default_str();
  gd->add_option("--ga-gens", ga_gens)->capture_default_str();

  auto* so = app.add_subcommand("solve", "Solve one instance");
  so->add_option("--instance", inst_path)->required();
  so->add_option("--method", method, "pdr:RULE, ga, random, greedy or sampling")->required();
  so->add_option("--bundle", bundle);
  so->add_option("--seed", seed)->capture_default_str();
  so->add_option("--out", out_s, "trace file");
  so->add_option("--ga-pop", ga_pop)->capture_default_str();
  so->add_option("--ga-gens", ga_gens)->capture_default_str();
  so->add_option("--k", k)->capture_default_str();
  so->add_option("--repeats", repeats)->capture_default_str();

  auto* tr = app.add_subcommand("train", "Train a policy offline");
  tr->add_option("--dataset", inst_dir)->required();
  tr->add_option("--config", config, "JSON train config");
  tr->add_option("--seed", seed);
  tr->add_option("--steps", steps);
  tr->add_option("--batch-size", batch);
  tr->add_option("--out", out_s);

  auto* ev = app.add_subcommand("eval", "Evaluate policies on instances");
  ev->add_option("--bundle", bundle);
  ev->add_option("--instances", inst_dir)->required();
  ev->add_option("--ub", ub, "upper bound table");
  ev->add_option("--mode", mode, "greedy or sampling (empty for none)")->capture_default_str();
  ev->add_option("--methods", extra, "extra comma separated methods: pdr:RULE, ga, random");
  ev->add_option("--k", k)->capture_default_str();
  ev->add_option("--repeats", repeats)->capture_default_str();
  ev->add_option("--seed", seed)->capture_default_str();
  ev->add_option("--out", out_s, "report path prefix");
  ev->add_option("--jobs", jobs)->capture_default_str();
  ev->add_option("--ga-pop", ga_pop)->capture_default_str();
  ev->add_option("--ga-gens", ga_gens)->capture_default_str();

  auto* an = app.add_subcommand("analyze-dataset", "State-action coverage and makespan histogram");
  an->add_option("--reference", ref_dir)->required();
  an->add_option("--target", target_dir)->required();
  an->add_option("--bins", bins)->capture_default_str();
  an->add_option("--out", out_s, "JSON summary file");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every autodiff primitive");
  gc->add_option("--seed", seed)->capture_default_str();
  gc->add_option("--tol", tol)->capture_default_str();

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*gi) return cmd_gen_instances(ctx, kind, n, m, count, seed, p_lo, p_hi, out_s);
    if (*gd) return cmd_gen_dataset(ctx, recipe, inst_dir, per_instance, seed, out_s, jobs, no_features, ga_pop, ga_gens);
    if (*so) return cmd_solve(ctx, inst_path, method, bundle, seed, out_s, ga_pop, ga_gens, k, repeats);
    if (*tr) return cmd_train(ctx, inst_dir, config, *tr, seed, steps, batch, out_s);
    if (*ev) return cmd_eval(ctx, bundle, inst_dir, ub, mode, k, repeats, seed, out_s, extra, jobs, ga_pop, ga_gens);
    if (*an) return cmd_analyze(ctx, ref_dir, target_dir, bins, out_s);
    if (*gc) return cmd_gradcheck(ctx, seed, tol);
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace cdqac
