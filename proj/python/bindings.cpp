#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <numeric>

#include "mdma/archive.hpp"
#include "mdma/dataset.hpp"
#include "mdma/errors.hpp"
#include "mdma/inference.hpp"
#include "mdma/query.hpp"
#include "mdma/sampler.hpp"
#include "mdma/toy_data.hpp"
#include "mdma/training.hpp"

namespace py = pybind11;
using namespace mdma;

namespace {

// NaN cells are treated as missing.
Dataset dataset_from_array(const RowMatrix& x) {
  Dataset data = Dataset::from_matrix(x);
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      data.missing[r * x.cols() + j] = std::isnan(x(r, j)) ? 1 : 0;
  data.validate();
  return data;
}

std::vector<std::uint8_t> nan_mask(const RowMatrix& x) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(x.size()));
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index j = 0; j < x.cols(); ++j) mask[r * x.cols() + j] = std::isnan(x(r, j)) ? 1 : 0;
  return mask;
}

py::list fit_model(MdmaModel& model, const RowMatrix& x, double lr, std::size_t batch, int epochs,
                   std::uint64_t seed, double validation, double clip, bool couple) {
  const Dataset data = dataset_from_array(x);
  TrainConfig config;
  config.learning_rate = lr;
  config.batch_size = batch;
  config.epochs = epochs;
  config.seed = seed;
  config.validation_fraction = validation;
  config.max_grad_norm = clip;
  FitResult result;
  {
    py::gil_scoped_release release;
    if (couple) {
      std::vector<std::size_t> rows(data.rows());
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      model.set_leaf_order(adaptive_coupling(data, rows, model.dims().pool_size));
    }
    result = fit(model, data, config);
  }
  if (result.diverged) throw NumericalError(result.message);
  py::list trace;
  for (const auto& rec : result.trace) trace.append(py::make_tuple(rec.epoch, rec.train_nll, rec.validation_nll));
  return trace;
}

}  // namespace

PYBIND11_MODULE(_mdma, m) {
  m.doc() = "Marginalizable density models";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<MdmaModel>(m, "Model")
      .def(py::init([](int d, int m_, int l, int r, int pool, std::uint64_t seed) {
             return init_model({d, m_, l, r, pool}, seed);
           }),
           py::arg("d"), py::arg("m") = 10, py::arg("l") = 2, py::arg("r") = 3, py::arg("pool") = 2,
           py::arg("seed") = 0)
      .def_property_readonly("d", &MdmaModel::d)
      .def_property_readonly("m", &MdmaModel::m)
      .def_property_readonly("dims", [](const MdmaModel& self) {
        const ModelDims& dm = self.dims();
        return py::dict(py::arg("d") = dm.d, py::arg("m") = dm.m, py::arg("l") = dm.depth,
                        py::arg("r") = dm.width, py::arg("pool") = dm.pool_size);
      })
      .def_property_readonly("leaf_order", [](const MdmaModel& self) {
        return std::vector<int>(self.leaf_order().begin(), self.leaf_order().end());
      })
      .def_property_readonly("params", [](const MdmaModel& self) {
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(self.params().data(),
                                                                 static_cast<Eigen::Index>(self.params().size())));
      })
      .def("save", [](const MdmaModel& self, const std::string& path) { save_model(path, self); }, py::arg("path"))
      .def_static("load", [](const std::string& path) { return load_model(path); }, py::arg("path"))
      .def("fit", &fit_model, "Train in place; returns [(epoch, train_nll, validation_nll)]. NaN marks missing.",
           py::arg("x"), py::arg("lr") = 0.01, py::arg("batch") = 500, py::arg("epochs") = 10, py::arg("seed") = 0,
           py::arg("validation") = 0.1, py::arg("clip") = 0.0, py::arg("couple") = true)
      .def("evaluate", [](const MdmaModel& self, const std::string& query) { return evaluate(self, parse_query(query)); },
           "Query of per-variable tags c:<x>|d:<x>|m|given:<x> joined by commas.", py::arg("query"))
      .def("log_density",
           [](const MdmaModel& self, const RowMatrix& x) {
             py::gil_scoped_release release;
             return Eigen::VectorXd(QueryEngine(self).log_density_batch(x, nan_mask(x)));
           },
           "Row-wise log (marginal) density; NaN entries are marginalized.", py::arg("x"))
      .def("sample",
           [](const MdmaModel& self, std::size_t n, std::uint64_t seed, const std::string& mode) {
             if (mode != "hierarchical" && mode != "autoregressive")
               throw InvalidArgument("mode must be 'hierarchical' or 'autoregressive'");
             py::gil_scoped_release release;
             return mode == "autoregressive" ? sample_autoregressive(self, n, seed) : sample(self, n, seed);
           },
           py::arg("n"), py::arg("seed") = 0, py::arg("mode") = "hierarchical")
      .def("density_grid", &density_grid, "Rows of (x_var1, x_var2, density) at grid-cell midpoints.",
           py::arg("var1"), py::arg("var2"), py::arg("lo"), py::arg("hi"), py::arg("steps"));

  m.def("mutual_information",
        [](const MdmaModel& model, const RowMatrix& x, const std::vector<int>& y, const std::vector<int>& z) {
          py::gil_scoped_release release;
          return estimate_mi(model, x, y, z);
        },
        py::arg("model"), py::arg("x"), py::arg("y"), py::arg("z"));

  m.def("ci_test",
        [](const MdmaModel& model, const RowMatrix& x, int i, int j, const std::vector<int>& cond, double alpha) {
          CiTestResult res;
          {
            py::gil_scoped_release release;
            res = ci_test(model, x, i, j, cond, alpha);
          }
          return py::dict(py::arg("tau") = res.statistic, py::arg("z") = res.z, py::arg("p_value") = res.p_value,
                          py::arg("reject") = res.reject, py::arg("dropped") = res.dropped);
        },
        py::arg("model"), py::arg("x"), py::arg("i"), py::arg("j"), py::arg("cond") = std::vector<int>{},
        py::arg("alpha") = 0.05);

  m.def("anomaly_scores",
        [](const MdmaModel& model, const RowMatrix& x) {
          py::gil_scoped_release release;
          return Eigen::VectorXd(anomaly_scores(model, x, nan_mask(x)));
        },
        "Per-row negative log-likelihood of the observed (non-NaN) coordinates.", py::arg("model"), py::arg("x"));

  m.def("make_toy", &make_toy, py::arg("name"), py::arg("n"), py::arg("seed") = 0, py::arg("d") = 4);

  m.def("load_csv",
        [](const std::string& path, const std::string& missing_token) {
          Dataset data = load_csv(path, missing_token);
          return py::make_tuple(data.values, data.names);
        },
        "Returns (values with NaN for missing cells, column names).", py::arg("path"), py::arg("missing") = "NA");
}
