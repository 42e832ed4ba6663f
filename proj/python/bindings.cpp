#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "varinf/datasets.hpp"
#include "varinf/em.hpp"
#include "varinf/errors.hpp"
#include "varinf/experiment.hpp"
#include "varinf/metrics.hpp"

namespace py = pybind11;
using namespace varinf;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-D array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Tensor({rows, cols}, std::vector<double>(a.data(), a.data() + rows * cols));
}

Array to_array(const Tensor& t) {
  Array out({t.rows(), t.cols()});
  std::copy(t.data(), t.data() + t.size(), out.mutable_data());
  return out;
}

py::dict gmm_dict(const GmmModel& m) {
  py::dict d;
  d["weights"] = m.weights;
  d["means"] = to_array(m.means);
  d["log_vars"] = to_array(m.log_vars);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Variational-inference view of generative models on toy data";
  m.attr("__version__") = kVersion;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<SupportError>(m, "SupportError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);

  m.def("kl_discrete", [](const std::vector<double>& p, const std::vector<double>& q) {
    return kl_discrete(p, q);
  }, py::arg("p"), py::arg("q"));

  m.def("bound_sweep", [](std::size_t trials, std::uint64_t seed, std::size_t rows, std::size_t cols) {
    const BoundSweep s = bound_sweep(trials, seed, rows, cols);
    py::dict d;
    d["trials"] = s.trials;
    d["holds"] = s.holds;
    d["min_gap"] = s.min_gap;
    return d;
  }, py::arg("trials") = 1000, py::arg("seed") = 0, py::arg("rows") = 4, py::arg("cols") = 4);

  m.def("make_dataset", [](const std::string& kind, std::size_t size, double noise, std::uint64_t seed,
                           const std::string& path) {
    const Dataset d = make_dataset({dataset_kind_from_string(kind), size, noise, seed, path});
    py::object truth = py::none();
    if (d.truth) truth = gmm_dict(*d.truth);
    return py::make_tuple(to_array(d.samples), truth);
  }, py::arg("kind") = "ring8", py::arg("size") = 4096, py::arg("noise") = 0.05,
     py::arg("seed") = 0, py::arg("path") = "");

  m.def("em_fit", [](const Array& data, std::size_t components, std::size_t max_iterations,
                     std::uint64_t seed) {
    EmConfig cfg;
    cfg.max_iterations = max_iterations;
    cfg.seed = seed;
    const EmResult r = em_fit(to_tensor(data), components, cfg);
    py::dict d = gmm_dict(r.model);
    d["loglik_history"] = r.loglik_history;
    d["iterations"] = r.iterations;
    d["events"] = r.events;
    return d;
  }, py::arg("data"), py::arg("components"), py::arg("max_iterations") = 500, py::arg("seed") = 0);

  m.def("kl_histogram", [](const Array& p, const Array& q, double lower, double upper, std::size_t bins) {
    const Tensor tp = to_tensor(p);
    return kl_histogram(tp, to_tensor(q), HistogramEstimator::uniform(tp.cols(), lower, upper, bins));
  }, py::arg("p"), py::arg("q"), py::arg("lower"), py::arg("upper"), py::arg("bins") = 40);

  m.def("mode_coverage", [](const Array& samples, const Array& centers, double radius,
                            std::size_t min_hits) {
    const ModeCoverage c = mode_coverage(to_tensor(samples), ModeSpec(to_tensor(centers), radius, min_hits));
    return py::make_tuple(c.modes_covered, c.captured_fraction);
  }, py::arg("samples"), py::arg("centers"), py::arg("radius"), py::arg("min_hits") = 0);

  m.def("run_experiment", [](const std::string& config_json, const std::vector<std::string>& overrides) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(config_json);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    for (const auto& o : overrides) apply_override(doc, o);
    const ExperimentConfig config = config_from_json(doc);
    ExperimentResult r;
    {
      py::gil_scoped_release release;
      r = run_experiment(config);
    }
    return r.summary.dump();
  }, py::arg("config_json"), py::arg("overrides") = std::vector<std::string>{});

  m.def("sample_checkpoint", [](const std::string& path, std::size_t count, std::uint64_t seed) {
    Rng rng(seed, Stream::kEval);
    return to_array(sample_checkpoint(load_checkpoint(path), count, rng));
  }, py::arg("path"), py::arg("count"), py::arg("seed") = 0);

  m.def("taylor_probe", [](const std::string& path, std::size_t directions,
                           const std::vector<double>& epsilons, std::size_t samples, std::size_t bins,
                           double lower, double upper, std::uint64_t seed) {
    const Mlp gen = checkpoint_generator(load_checkpoint(path));
    const auto est = HistogramEstimator::uniform(gen.output_dim(), lower, upper, bins);
    Rng dir_rng(seed, Stream::kProbe);
    py::list out;
    for (std::size_t d = 0; d < directions; ++d) {
      const auto dir = random_unit_direction(gen.param_count(), dir_rng);
      const auto r = taylor_scaling_probe(gen, dir, epsilons, samples, est, seed + d);
      py::dict item;
      item["slope"] = r.slope;
      item["r2"] = r.r2;
      item["inconclusive"] = r.inconclusive;
      item["points"] = r.points;
      out.append(item);
    }
    return out;
  }, py::arg("path"), py::arg("directions") = 5,
     py::arg("epsilons") = std::vector<double>{0.01, 0.02, 0.04}, py::arg("samples") = 1000000,
     py::arg("bins") = 60, py::arg("lower") = -1.5, py::arg("upper") = 1.5, py::arg("seed") = 0);
}
