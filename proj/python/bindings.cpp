#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "vrprl/bench.hpp"
#include "vrprl/config.hpp"
#include "vrprl/env.hpp"
#include "vrprl/errors.hpp"
#include "vrprl/heuristics.hpp"
#include "vrprl/instances.hpp"
#include "vrprl/policy.hpp"
#include "vrprl/svrp.hpp"
#include "vrprl/training.hpp"

namespace py = pybind11;
using namespace vrprl;

namespace {

// Config dicts cross the boundary as JSON text; the Python wrapper calls
// json.dumps so the C++ side sees exactly what a config file would hold.
nlohmann::json parse(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

py::dict metrics_dict(const TrainMetrics& m) {
  py::dict d;
  d["iteration"] = m.iteration;
  d["mean_reward"] = m.mean_reward;
  d["mean_advantage"] = m.mean_advantage;
  d["actor_loss"] = m.actor_loss;
  d["critic_loss"] = m.critic_loss;
  d["grad_norm_pre_clip"] = m.grad_norm_pre_clip;
  d["critic_grad_norm_pre_clip"] = m.critic_grad_norm_pre_clip;
  d["wall_s"] = m.wall_s;
  return d;
}

struct Policy {
  LoadedPolicy loaded;

  Solution solve(const ProblemInstance& inst, const std::string& mode, int beam_width, bool split,
                 std::uint64_t seed) const {
    DecodeOptions opt;
    opt.mode = decode_mode_from_string(mode);
    opt.beam_width = beam_width;
    opt.split_mode = split;
    Rng rng(seed);
    return rollout(inst, loaded.actor, loaded.actor_cfg, opt, rng).solution;
  }
};

}  // namespace

PYBIND11_MODULE(_vrprl, m) {
  m.doc() = "Capacitated and stochastic vehicle routing with attention policies and classical baselines";

  auto base = py::register_exception<Error>(m, "VrprlError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<ParseError>(m, "ParseError", base);
  py::register_exception<SchemaError>(m, "SchemaError", base);
  py::register_exception<KindError>(m, "KindError", base);
  py::register_exception<ContractViolation>(m, "ContractViolation", base);
  py::register_exception<TerminalStateError>(m, "TerminalStateError", base);
  py::register_exception<SizeError>(m, "SizeError", base);
  py::register_exception<ShapeError>(m, "ShapeError", base);
  py::register_exception<NumericHealthError>(m, "NumericHealthError", base);
  py::register_exception<LoadError>(m, "LoadError", base);
  py::register_exception<StaleActionError>(m, "StaleActionError", base);

  py::class_<Coord>(m, "Coord")
      .def(py::init<>())
      .def(py::init([](double x, double y) { return Coord{x, y}; }), py::arg("x"), py::arg("y"))
      .def_readwrite("x", &Coord::x)
      .def_readwrite("y", &Coord::y)
      .def("__eq__", [](const Coord& a, const Coord& b) { return a == b; })
      .def("__repr__", [](const Coord& c) { return "Coord(" + std::to_string(c.x) + ", " + std::to_string(c.y) + ")"; });
  m.def("distance", &distance);

  py::class_<CustomerSpec>(m, "Customer")
      .def(py::init<>())
      .def(py::init([](Coord c, int d) { return CustomerSpec{c, d}; }), py::arg("location"), py::arg("demand"))
      .def_readwrite("location", &CustomerSpec::location)
      .def_readwrite("demand", &CustomerSpec::demand);

  py::enum_<ProblemKind>(m, "ProblemKind").value("cvrp", ProblemKind::cvrp).value("tsp", ProblemKind::tsp);

  py::class_<ProblemInstance>(m, "Instance")
      .def(py::init<>())
      .def_readwrite("kind", &ProblemInstance::kind)
      .def_readwrite("id", &ProblemInstance::id)
      .def_readwrite("depot", &ProblemInstance::depot)
      .def_readwrite("customers", &ProblemInstance::customers)
      .def_readwrite("capacity", &ProblemInstance::capacity)
      .def_property_readonly("num_customers", &ProblemInstance::num_customers)
      .def_property_readonly("depot_index", &ProblemInstance::depot_index)
      .def("validate", &ProblemInstance::validate)
      .def("to_json", &instance_to_json_line)
      .def_static("from_json", [](const std::string& s) { return instance_from_json_line(s); })
      .def("__eq__", [](const ProblemInstance& a, const ProblemInstance& b) { return a == b; });

  m.def(
      "generate_instances",
      [](int n, int capacity, std::size_t count, std::uint64_t seed, ProblemKind kind) {
        GeneratorConfig g;
        g.kind = kind;
        g.n_customers = n;
        g.capacity = capacity;
        g.seed = seed;
        return generate_instances(g, count);
      },
      py::arg("n"), py::arg("capacity"), py::arg("count"), py::arg("seed") = 0, py::arg("kind") = ProblemKind::cvrp);
  m.def("reference_capacity", &reference_capacity);
  m.def("read_instances", &read_instances);
  m.def("write_instances", &write_instances);

  py::class_<Solution>(m, "Solution")
      .def_readonly("instance_id", &Solution::instance_id)
      .def_readonly("solver_tag", &Solution::solver_tag)
      .def_readonly("sequence", &Solution::sequence)
      .def_readonly("total_length", &Solution::total_length)
      .def_readonly("wall_time_s", &Solution::wall_time_s)
      .def_readonly("split_mode", &Solution::split_mode)
      .def_readonly("complete", &Solution::complete)
      .def("to_json", &solution_to_json);

  py::class_<FeasibilityReport>(m, "FeasibilityReport")
      .def_readonly("feasible", &FeasibilityReport::feasible)
      .def_readonly("all_demand_served", &FeasibilityReport::all_demand_served)
      .def_readonly("violations", &FeasibilityReport::violations);
  m.def("validate_solution", &validate_solution, py::arg("instance"), py::arg("sequence"),
        py::arg("split_mode") = false);
  m.def("tour_length", &tour_length);

  py::class_<CvrpState>(m, "CvrpState")
      .def_readonly("remaining_demand", &CvrpState::remaining_demand)
      .def_readonly("capacity", &CvrpState::capacity)
      .def_readonly("load", &CvrpState::load)
      .def_readonly("position", &CvrpState::position)
      .def_readonly("sequence", &CvrpState::sequence)
      .def_readonly("done", &CvrpState::done)
      .def_property_readonly("terminal", &CvrpState::terminal)
      .def("feasible_mask", [](const CvrpState& s) {
        const auto mask = feasible_mask(s);
        return std::vector<bool>(mask.begin(), mask.end());
      })
      .def("step", [](const CvrpState& s, int action) { return step(s, action).state; });
  m.def("reset", &reset, py::arg("instance"), py::arg("split_mode") = false);

  m.def(
      "clarke_wright",
      [](const ProblemInstance& inst, int depth, int iterations, std::uint64_t seed) {
        return clarke_wright(inst, CwConfig{depth, iterations, seed});
      },
      py::arg("instance"), py::arg("depth") = 1, py::arg("iterations") = 1, py::arg("seed") = 0);
  m.def(
      "sweep",
      [](const ProblemInstance& inst, int angles, std::uint64_t seed) {
        return sweep(inst, SweepConfig{angles, angles > 1, seed});
      },
      py::arg("instance"), py::arg("angles") = 1, py::arg("seed") = 0);
  m.def("cvrp_exact", &cvrp_exact);
  m.def("tsp_exact", [](const std::vector<Coord>& pts) {
    const auto t = tsp_exact(pts);
    return py::make_tuple(t.order, t.length);
  });

  py::class_<Policy>(m, "Policy")
      .def_property_readonly("embed_dim", [](const Policy& p) { return p.loaded.actor_cfg.embed_dim; })
      .def("solve", &Policy::solve, py::arg("instance"), py::arg("mode") = "greedy", py::arg("beam_width") = 1,
           py::arg("split") = false, py::arg("seed") = 0)
      .def("critic_value", [](const Policy& p, const ProblemInstance& inst) {
        if (p.loaded.critic.all().empty()) throw LoadError("checkpoint has no critic");
        return critic_value(inst, p.loaded.actor, p.loaded.actor_cfg, p.loaded.critic);
      });
  m.def("load_policy", [](const std::filesystem::path& dir) { return Policy{load_policy(dir)}; });

  m.def("_train", [](const std::string& config) {
    const TrainConfig cfg = train_config_from_json(parse(config));
    TrainOutcome out;
    {
      py::gil_scoped_release release;
      out = reinforce_train(cfg);
    }
    py::list rows;
    for (const auto& row : out.metrics) rows.append(metrics_dict(row));
    return rows;
  });

  m.def("_svrp_bench", [](const std::string& config, const std::vector<std::string>& strategies, int episodes,
                          std::uint64_t seed, const std::string& checkpoint) {
    const SvrpConfig cfg = svrp_config_from_json(parse(config));
    std::unique_ptr<LoadedPolicy> policy;
    if (!checkpoint.empty()) policy = std::make_unique<LoadedPolicy>(load_policy(checkpoint));
    py::list out;
    for (const auto& r : svrp_bench(cfg, strategies, episodes, seed, policy.get())) {
      py::dict d;
      d["strategy"] = r.strategy;
      d["satisfied"] = r.satisfied;
      d["arrived"] = r.arrived;
      d["mean_satisfied"] = r.mean_satisfied;
      d["std_error"] = r.std_error;
      d["percent_of_arrived"] = r.percent_of_arrived;
      out.append(d);
    }
    return out;
  });
}
