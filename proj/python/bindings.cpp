#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cfassign/baselines.hpp"
#include "cfassign/errors.hpp"
#include "cfassign/hpe_gnn.hpp"
#include "cfassign/problem.hpp"
#include "cfassign/scenario.hpp"
#include "cfassign/training.hpp"

namespace py = pybind11;
using namespace cfa;

namespace {

py::dict result_dict(const AssignmentResult& r) {
  py::dict d;
  d["S"] = r.S;
  d["sum_rate"] = r.sum_rate;
  d["feasible"] = r.feasible;
  d["enumerated_count"] = r.enumerated_count;
  d["search_space"] = r.search_space;
  d["available"] = r.available;
  return d;
}

py::dict record_dict(const MetricsRecord& r) {
  py::dict d;
  d["iteration"] = r.iteration;
  d["phase"] = to_string(r.phase);
  d["lambda1"] = r.lambda1;
  d["lambda2"] = r.lambda2;
  d["nu1"] = r.nu1;
  d["nu2"] = r.nu2;
  d["train_f"] = r.train_f;
  d["test_f"] = r.test_f;
  d["conn_pen"] = r.conn_pen;
  d["disc_pen"] = r.disc_pen;
  d["test_conn_pen"] = r.test_conn_pen;
  d["test_disc_pen"] = r.test_disc_pen;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "AP-user assignment: scenarios, GNN inference and training, baselines";
  m.attr("__version__") = CFASSIGN_VERSION;

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  py::class_<Point>(m, "Point")
      .def_readonly("x", &Point::x)
      .def_readonly("y", &Point::y)
      .def("__repr__", [](const Point& p) {
        return "Point(" + std::to_string(p.x) + ", " + std::to_string(p.y) + ")";
      });

  py::class_<Scenario>(m, "Scenario")
      .def_readonly("name", &Scenario::name)
      .def_readonly("n_aps", &Scenario::n_aps)
      .def_readonly("n_users", &Scenario::n_users)
      .def_readonly("ap_positions", &Scenario::ap_positions)
      .def_readonly("min_serving_aps", &Scenario::min_serving_aps)
      .def_readonly("max_served_users", &Scenario::max_served_users)
      .def_readonly("noise_power", &Scenario::noise_power)
      .def_readonly("gain_scale", &Scenario::gain_scale)
      .def_readonly("rician_variance", &Scenario::rician_variance);

  m.def("small_scenario", &small_scenario);
  m.def("large_scenario", &large_scenario);
  m.def("scenario_preset", &scenario_preset, py::arg("name"));

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("scenario", &Dataset::scenario)
      .def_readonly("seed", &Dataset::seed)
      .def_property_readonly("split", [](const Dataset& d) { return to_string(d.split); })
      .def("__len__", [](const Dataset& d) { return d.samples.size(); })
      .def("gains", [](const Dataset& d, std::size_t i) { return d.samples.at(i).gains; },
           py::arg("index"))
      .def("save", [](const Dataset& d, const std::filesystem::path& p) { save_dataset(d, p); });

  m.def(
      "generate_dataset",
      [](const Scenario& s, int size, std::uint64_t seed, const std::string& split) {
        return generate_dataset(s, size, seed, split_from_string(split));
      },
      py::arg("scenario"), py::arg("size"), py::arg("seed"), py::arg("split") = "train");
  m.def("load_dataset", &load_dataset, py::arg("path"));

  m.def("sum_rate", &sum_rate, py::arg("gains"), py::arg("assignment"), py::arg("noise_power"));
  m.def(
      "connection_violation",
      [](const Eigen::MatrixXd& s, int L) {
        const auto v = connection_violation(s, L);
        return py::make_tuple(v.per_user, v.total);
      },
      py::arg("assignment"), py::arg("min_serving_aps"));
  m.def(
      "discreteness_penalty",
      [](const std::vector<Eigen::MatrixXd>& runs) {
        const auto p = discreteness_penalty(runs);
        return py::make_tuple(p.per_ap, p.total);
      },
      py::arg("runs"));
  m.def("binarize", &binarize, py::arg("runs"));
  m.def(
      "is_feasible",
      [](const Eigen::MatrixXd& s, int U, int L) { return check_constraints(s, U, L).feasible(); },
      py::arg("assignment"), py::arg("max_served_users"), py::arg("min_serving_aps"));

  m.def(
      "exhaustive",
      [](const Eigen::MatrixXd& g, int U, int L, double sigma2, bool require_lower,
         std::uint64_t budget) {
        return result_dict(exhaustive(g, U, L, sigma2, require_lower, budget));
      },
      py::arg("gains"), py::arg("max_served_users"), py::arg("min_serving_aps"),
      py::arg("noise_power"), py::arg("require_lower") = true,
      py::arg("budget") = kDefaultEnumerationBudget);
  m.def(
      "gsd",
      [](const Eigen::MatrixXd& g, int U, int L, double sigma2) {
        return result_dict(gsd(g, U, L, sigma2));
      },
      py::arg("gains"), py::arg("max_served_users"), py::arg("min_serving_aps"),
      py::arg("noise_power"));
  m.def(
      "random_assignment",
      [](const Eigen::MatrixXd& g, int U, int L, double sigma2, std::uint64_t seed) {
        Rng rng(seed);
        return result_dict(random_assignment(g, U, L, sigma2, rng));
      },
      py::arg("gains"), py::arg("max_served_users"), py::arg("min_serving_aps"),
      py::arg("noise_power"), py::arg("seed") = 0);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("layers", &ModelConfig::layers)
      .def_readwrite("hidden_width", &ModelConfig::hidden_width)
      .def_readwrite("message_width", &ModelConfig::message_width)
      .def_property(
          "topology", [](const ModelConfig& c) { return to_string(c.topology); },
          [](ModelConfig& c, const std::string& t) { c.topology = topology_from_string(t); });
  m.def("parameter_count", py::overload_cast<const ModelConfig&>(&parameter_count),
        py::arg("config"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("convergence_window", &TrainConfig::convergence_window)
      .def_readwrite("convergence_tol", &TrainConfig::convergence_tol)
      .def_readwrite("max_inner_iters", &TrainConfig::max_inner_iters)
      .def_readwrite("max_outer_iters", &TrainConfig::max_outer_iters)
      .def_readwrite("delta_nu", &TrainConfig::delta_nu)
      .def_readwrite("violation_tol", &TrainConfig::violation_tol)
      .def_readwrite("entropy_tol", &TrainConfig::entropy_tol)
      .def_readwrite("eval_batch_size", &TrainConfig::eval_batch_size)
      .def_readwrite("test_every", &TrainConfig::test_every)
      .def_readwrite("eval_chunk", &TrainConfig::eval_chunk)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<Model>(m, "Model")
      .def_property_readonly("config", [](const Model& mo) { return mo.config; })
      .def(
          "assign",
          [](const Model& mo, const Eigen::MatrixXd& g, const Scenario& s) {
            const auto topo = build_graph(s, mo.config.topology);
            const auto a = recurrent_assign(mo.params, mo.config, g, topo, s.max_served_users,
                                            s.min_serving_aps, s.noise_power, mo.norm);
            return py::make_tuple(a.runs, a.combined);
          },
          py::arg("gains"), py::arg("scenario"),
          "Per-run relaxed outputs and their sum, each K x N.")
      .def(
          "evaluate",
          [](const Model& mo, const Dataset& d) {
            const auto e = evaluate(mo, d);
            py::dict r;
            r["samples"] = e.samples;
            r["relaxed_sum_rate"] = e.relaxed_sum_rate;
            r["binary_sum_rate"] = e.binary_sum_rate;
            r["relaxed_connection_penalty"] = e.relaxed_connection_penalty;
            r["discreteness_penalty"] = e.discreteness_penalty;
            r["mean_run_entropy"] = e.mean_run_entropy;
            r["feasible_fraction"] = e.feasible_fraction;
            r["duplicate_pick_rate"] = e.duplicate_pick_rate;
            return r;
          },
          py::arg("dataset"))
      .def("save", [](const Model& mo, const std::filesystem::path& p) {
        save_checkpoint(Checkpoint{mo, std::nullopt}, p);
      });
  m.def(
      "load_model", [](const std::filesystem::path& p) { return load_checkpoint(p).model; },
      py::arg("path"));

  m.def(
      "train",
      [](const Dataset& train_set, const Dataset& test_set, const ModelConfig& mc,
         const TrainConfig& tc) {
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(train_set, test_set, mc, tc);
        }
        py::list rows;
        for (const auto& rec : r.metrics.records()) rows.append(record_dict(rec));
        return py::make_tuple(r.model, rows);
      },
      py::arg("train_set"), py::arg("test_set"), py::arg("model_config"),
      py::arg("train_config"),
      "Runs the staged ALM training; returns (model, list of per-iteration records).");
}
