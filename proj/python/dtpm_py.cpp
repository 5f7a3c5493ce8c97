#include "dtpm/cli.hpp"
#include "dtpm/errors.hpp"
#include "dtpm/evaluation.hpp"
#include "dtpm/model_io.hpp"
#include "dtpm/models.hpp"
#include "dtpm/neighbors.hpp"
#include "dtpm/posterior.hpp"

#include <pybind11/eigen.h>
#include <pybind11/iostream.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <iostream>

namespace py = pybind11;
using namespace dtpm;

namespace {

using ScoreVector = Eigen::VectorXd;

struct PyModel {
    DtpmModel model;

    std::string method() const {
        return std::holds_alternative<InvGammaModel>(model) ? "invgamma" : "categorical";
    }
    int input_dim() const { return standardizer(model).dim(); }
    ScoreVector score(const Matrix& x) const { return score_batch(model, x); }
    double loss() const { return final_loss(model); }
    std::string to_json() const { return model_to_json(model).dump(); }
};

PyModel fit(const std::string& method_name, const Matrix& x, int epochs, int batch_size, double lr, double dropout,
            int timesteps, double beta_hi, int bins, const std::vector<int>& hidden, std::uint64_t seed) {
    const Method method = parse_method(method_name);
    if (!is_parametric(method)) {
        throw ConfigError("fit needs a parametric method (invgamma or categorical)");
    }
    TrainConfig config;
    config.epochs = epochs;
    config.batch_size = batch_size;
    config.lr = lr;
    config.dropout = dropout;
    config.timesteps = timesteps;
    config.beta_hi = beta_hi;
    config.bins = bins;
    config.hidden = hidden;
    config.seed = seed;
    const Standardizer s = Standardizer::fit(x);
    const Matrix z = s.apply(x);
    py::gil_scoped_release release;
    return PyModel{train(method, z, s, config)};
}

ScoreVector nonparametric_scores(const Matrix& train, const Matrix& queries, int k) {
    const KnnIndex index(train);
    if (queries.cols() != train.cols()) {
        throw DimensionError("query width does not match training width");
    }
    ScoreVector out(queries.rows());
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        out[i] = nonparametric_score(queries.row(i).transpose(), index, k);
    }
    return out;
}

ScoreVector analytic_scores(const Matrix& train, const Matrix& queries, int timesteps, double beta_hi) {
    const DiffusionSchedule schedule = build_schedule(timesteps, beta_hi);
    if (queries.cols() != train.cols()) {
        throw DimensionError("query width does not match training width");
    }
    ScoreVector out(queries.rows());
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        out[i] = analytic_score(queries.row(i).transpose(), train, schedule);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_dtpm, m) {
    m.doc() = "Diffusion-time anomaly detectors";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<ContractError>(m, "ContractError", base.ptr());
    py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
    py::register_exception<IndexError>(m, "IndexError", base.ptr());
    py::register_exception<MetricError>(m, "MetricError", base.ptr());

    py::class_<DiffusionSchedule>(m, "Schedule")
        .def_readonly("timesteps", &DiffusionSchedule::timesteps)
        .def_readonly("beta_hi", &DiffusionSchedule::beta_hi)
        .def_readonly("betas", &DiffusionSchedule::betas)
        .def_readonly("alpha_bars", &DiffusionSchedule::alpha_bars)
        .def_readonly("sigmas", &DiffusionSchedule::sigmas)
        .def_readonly("sigma2s", &DiffusionSchedule::sigma2s);
    m.def("build_schedule", &build_schedule, py::arg("timesteps") = 300, py::arg("beta_hi") = 0.01);

    m.def("logsumexp", [](const std::vector<double>& v) { return logsumexp(v); });
    m.def("nonparametric_scores", &nonparametric_scores, py::arg("train"), py::arg("queries"), py::arg("k") = 32,
          "Mode of the k-NN inverse-Gamma posterior for every query row.");
    m.def("analytic_scores", &analytic_scores, py::arg("train"), py::arg("queries"), py::arg("timesteps") = 300,
          py::arg("beta_hi") = 0.01, "Posterior mean of sigma^2 given the whole training set.");

    py::class_<PyModel>(m, "Model")
        .def_property_readonly("method", &PyModel::method)
        .def_property_readonly("input_dim", &PyModel::input_dim)
        .def_property_readonly("final_loss", &PyModel::loss)
        .def("score", &PyModel::score, py::arg("x"), "Anomaly scores of raw rows; larger is more anomalous.")
        .def("to_json", &PyModel::to_json)
        .def("save", [](const PyModel& self, const std::string& path) { save_model(self.model, path); })
        .def_static("load", [](const std::string& path) { return PyModel{load_model(path)}; });

    m.def("fit", &fit, py::arg("method"), py::arg("x"), py::arg("epochs") = 400, py::arg("batch_size") = 64,
          py::arg("lr") = 1e-4, py::arg("dropout") = 0.5, py::arg("timesteps") = 300, py::arg("beta_hi") = 0.01,
          py::arg("bins") = 7, py::arg("hidden") = std::vector<int>{256, 512, 256}, py::arg("seed") = 0,
          "Standardizes x and trains a parametric model on it.");

    m.def("auc_roc", [](const std::vector<double>& s, const std::vector<int>& l) { return auc_roc(s, l); });
    m.def("auc_pr", [](const std::vector<double>& s, const std::vector<int>& l) { return auc_pr(s, l); });
    m.def("f1_at_contamination",
          [](const std::vector<double>& s, const std::vector<int>& l) { return f1_at_contamination(s, l); });

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            py::scoped_ostream_redirect out(std::cout, py::module_::import("sys").attr("stdout"));
            py::scoped_estream_redirect err(std::cerr, py::module_::import("sys").attr("stderr"));
            return cli::run(args, std::cout, std::cerr);
        },
        py::arg("args"), "Runs the command-line tool in-process and returns its exit code.");
}
