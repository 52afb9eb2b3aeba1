#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cdqac/cli.hpp"
#include "cdqac/dataset.hpp"
#include "cdqac/errors.hpp"
#include "cdqac/eval.hpp"
#include "cdqac/heuristics.hpp"
#include "cdqac/trainer.hpp"

namespace py = pybind11;
using namespace cdqac;

namespace {

py::tuple action_tuple(const Action& a) { return py::make_tuple(a.op.job, a.op.pos, a.machine); }

Action action_from(const py::tuple& t) {
  if (t.size() != 3) throw ParameterError("action must be (job, pos, machine)");
  return Action{{t[0].cast<int>(), t[1].cast<int>()}, t[2].cast<int>()};
}

std::vector<py::tuple> trace_rows(const ScheduleTrace& t) {
  std::vector<py::tuple> rows;
  for (const auto& s : t.steps) rows.push_back(py::make_tuple(s.action.op.job, s.action.op.pos, s.action.machine, s.start, s.end));
  return rows;
}

ScheduleTrace trace_from(const std::vector<py::tuple>& rows) {
  ScheduleTrace t;
  for (const auto& r : rows) {
    if (r.size() != 5) throw ParameterError("trace rows are (job, pos, machine, start, end)");
    t.steps.push_back({{{r[0].cast<int>(), r[1].cast<int>()}, r[2].cast<int>()}, r[3].cast<int>(), r[4].cast<int>()});
  }
  return t;
}

}  // namespace

PYBIND11_MODULE(_cdqac, m) {
  m.doc() = "Offline RL for job shop scheduling";

  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<Instance>(m, "Instance")
      .def_property_readonly("kind", [](const Instance& i) { return to_string(i.kind()); })
      .def_property_readonly("num_jobs", &Instance::num_jobs)
      .def_property_readonly("num_machines", &Instance::num_machines)
      .def_property_readonly("num_operations", &Instance::num_operations)
      .def_property("name", &Instance::name, &Instance::set_name)
      .def("eligible", [](const Instance& i, int job, int pos) {
        std::vector<std::pair<int, int>> out;
        for (const auto& e : i.op({job, pos}).eligible()) out.emplace_back(e.machine, e.time);
        return out;
      })
      .def("content_hash", &Instance::content_hash)
      .def("serialize", [](const Instance& i) { return serialize(i); })
      .def("__eq__", [](const Instance& a, const Instance& b) { return a == b; })
      .def("__repr__", [](const Instance& i) {
        return "<Instance " + to_string(i.kind()) + " " + std::to_string(i.num_jobs()) + "x" +
               std::to_string(i.num_machines()) + ">";
      });

  m.def("generate_fjsp", &generate_fjsp, py::arg("num_jobs"), py::arg("num_machines"), py::arg("seed"),
        py::arg("p_lo") = 1, py::arg("p_hi") = 99);
  m.def("generate_jsp", &generate_jsp, py::arg("num_jobs"), py::arg("num_machines"), py::arg("seed"),
        py::arg("p_lo") = 1, py::arg("p_hi") = 99);
  m.def("parse_instance", [](const std::string& text, const std::string& kind) {
    return parse_instance(text, parse_problem_kind(kind));
  }, py::arg("text"), py::arg("kind"));
  m.def("load_instance", [](const std::string& path) { return load_instance(path); }, py::arg("path"));

  py::class_<SimState>(m, "SimState")
      .def(py::init<const Instance&>(), py::keep_alive<1, 2>())
      .def_property_readonly("now", &SimState::now)
      .def_property_readonly("partial_makespan", &SimState::partial_makespan)
      .def("is_terminal", &SimState::is_terminal)
      .def("legal_actions", [](const SimState& s) {
        std::vector<py::tuple> out;
        for (const auto& a : s.legal_actions()) out.push_back(action_tuple(a));
        return out;
      })
      .def("apply", [](SimState& s, const py::tuple& a) { return s.apply(action_from(a)); })
      .def("trace", [](const SimState& s) { return trace_rows(s.trace()); });

  m.def("makespan", [](const std::vector<py::tuple>& rows, const Instance& i) { return makespan(trace_from(rows), i); });
  m.def("validate", [](const std::vector<py::tuple>& rows, const Instance& i) {
    std::vector<std::string> kinds;
    for (const auto& v : validate(trace_from(rows), i)) kinds.push_back(v.kind);
    return kinds;
  });

  m.def("pdr_names", [](const std::string& kind) {
    std::vector<std::string> out;
    for (const auto& s : all_pdrs(parse_problem_kind(kind))) out.push_back(s.name());
    return out;
  });
  m.def("solve_pdr", [](const Instance& i, const std::string& rule) {
    return trace_rows(rollout(i, pdr_policy(PdrSpec::parse(rule))));
  });
  m.def("solve_random", [](const Instance& i, std::uint64_t seed) { return trace_rows(rollout(i, random_policy(seed))); });
  m.def("solve_ga", [](const Instance& i, int population, int generations, std::uint64_t seed) {
    GaConfig c;
    c.population_size = population;
    c.generations = generations;
    c.seed = seed;
    return trace_rows(ga_solve(i, c).best);
  }, py::arg("instance"), py::arg("population") = 200, py::arg("generations") = 100, py::arg("seed") = 1);

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("num_instances", [](const Dataset& d) { return d.instances().size(); })
      .def_property_readonly("num_trajectories", [](const Dataset& d) { return d.trajectories().size(); })
      .def_property_readonly("num_transitions", &Dataset::num_transitions)
      .def("makespans", [](const Dataset& d) {
        std::vector<int> out;
        for (const auto& t : d.trajectories()) out.push_back(t.makespan);
        return out;
      })
      .def("save", [](const Dataset& d, const std::filesystem::path& dir) { save_dataset(d, dir); });

  m.def("build_dataset", [](const std::vector<Instance>& instances, const std::string& recipe, std::uint64_t seed,
                            int random_per_instance, int ga_population, int ga_generations, bool with_features) {
    BuildOptions o;
    o.recipe = parse_recipe(recipe);
    o.seed = seed;
    o.random_per_instance = random_per_instance;
    o.ga.population_size = ga_population;
    o.ga.generations = ga_generations;
    o.with_features = with_features;
    py::gil_scoped_release release;
    return build_dataset(instances, o);
  }, py::arg("instances"), py::arg("recipe") = "pdr", py::arg("seed") = 1, py::arg("random_per_instance") = 100,
     py::arg("ga_population") = 200, py::arg("ga_generations") = 100, py::arg("with_features") = true);
  m.def("load_dataset", [](const std::filesystem::path& dir) { return load_dataset(dir); });
  m.def("saco", &saco, py::arg("dataset"), py::arg("reference"));

  py::class_<PolicyBundle>(m, "PolicyBundle")
      .def_property_readonly("trained_steps", [](const PolicyBundle& b) { return b.trained_steps; })
      .def("config_json", [](const PolicyBundle& b) { return train_config_to_json_text(b.config); })
      .def("save", [](const PolicyBundle& b, const std::filesystem::path& f) { save_bundle(b, f); });

  m.def("train", [](const Dataset& d, const std::string& config_json) {
    const TrainConfig c = train_config_from_json_text(config_json.empty() ? "{}" : config_json);
    py::gil_scoped_release release;
    return train(d, c).bundle;
  }, py::arg("dataset"), py::arg("config_json") = "");
  m.def("load_bundle", [](const std::filesystem::path& p) { return load_bundle(p); });
  m.def("solve_greedy", [](const PolicyBundle& b, const Instance& i) {
    return trace_rows(rollout_greedy(NetPolicy(b), i));
  });
  m.def("solve_sampling", [](const PolicyBundle& b, const Instance& i, int k, std::uint64_t seed) {
    return trace_rows(rollout_sampling(NetPolicy(b), i, k, 1, seed).best);
  }, py::arg("bundle"), py::arg("instance"), py::arg("k") = 100, py::arg("seed") = 1);
  m.def("gap", &gap, py::arg("c_max"), py::arg("c_ub"));

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"));
}
