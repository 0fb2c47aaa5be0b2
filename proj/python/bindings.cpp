// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "upat/checkpoint.hpp"
#include "upat/config.hpp"
#include "upat/cost.hpp"
#include "upat/errors.hpp"
#include "upat/evaluation.hpp"
#include "upat/pyramid.hpp"
#include "upat/run.hpp"

namespace py = pybind11;
using namespace upat;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array grid_to_array(const LevelGrid& g) {
  Array a({g.rows, g.cols, g.depth});
  std::copy(g.values.begin(), g.values.end(), a.mutable_data());
  return a;
}

Array image_array(const std::vector<double>& v, ImageShape s) {
  Array a({s.height, s.width, s.channels});
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

ImageShape shape_of(const std::tuple<int, int, int>& t) { return {std::get<0>(t), std::get<1>(t), std::get<2>(t)}; }

std::string cost_json_text(const PassCostReport& r) {
  return nlohmann::json{{"method", r.method},
                        {"attack_steps", r.attack_steps},
                        {"generation_units", r.gen_passes_per_step},
                        {"train_forward_units", r.train_forward_units},
                        {"train_backward_units", r.train_backward_units},
                        {"units_per_step", r.total_units_per_step},
                        {"relative_cost", r.relative_cost}}
      .dump();
}

ExperimentConfig config_from(const std::string& yaml, const std::map<std::string, std::string>& overrides) {
  std::vector<std::pair<std::string, std::string>> ov(overrides.begin(), overrides.end());
  return parse_config(yaml, ov);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Universal pyramid adversarial training core";

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<DataError> data_error(m, "DataError", PyExc_OSError);
  static py::exception<NumericError> numeric_error(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const DataError& e) {
      py::set_error(data_error, e.what());
    } catch (const NumericError& e) {
      py::set_error(numeric_error, e.what());
    }
  });

  py::class_<PyramidSpec>(m, "PyramidSpec")
      .def(py::init([](std::vector<int> scales, std::vector<double> multipliers, double radius, double step_size,
                       bool per_channel) {
             PyramidSpec s{.scales = std::move(scales), .multipliers = std::move(multipliers), .radius = radius,
                           .step_size = step_size, .per_channel = per_channel};
             s.validate();
             return s;
           }),
           py::arg("scales") = std::vector<int>{32, 16, 1}, py::arg("multipliers") = std::vector<double>{20, 10, 1},
           py::arg("radius") = 8.0 / 255, py::arg("step_size") = 0.8 / 255, py::arg("per_channel") = true)
      .def_readonly("scales", &PyramidSpec::scales)
      .def_readonly("multipliers", &PyramidSpec::multipliers)
      .def_readonly("radius", &PyramidSpec::radius)
      .def_readonly("step_size", &PyramidSpec::step_size)
      .def_readonly("per_channel", &PyramidSpec::per_channel)
      .def("__repr__", [](const PyramidSpec& s) {
        std::ostringstream o;
        o << "PyramidSpec(levels=" << s.scales.size() << ", radius=" << s.radius << ")";
        return o.str();
      });

  py::class_<PyramidPerturbation>(m, "Pyramid")
      .def_static(
          "zeros", [](const PyramidSpec& s, std::tuple<int, int, int> shape) { return init_zeros(s, shape_of(shape)); },
          py::arg("spec"), py::arg("shape"))
      .def_property_readonly("spec", &PyramidPerturbation::spec)
      .def_property_readonly("shape",
                             [](const PyramidPerturbation& p) {
                               const auto& t = p.target_shape();
                               return py::make_tuple(t.height, t.width, t.channels);
                             })
      .def_property_readonly("num_levels", [](const PyramidPerturbation& p) { return p.levels().size(); })
      .def("level", [](const PyramidPerturbation& p, std::size_t i) { return grid_to_array(p.level(i)); })
      .def("set_level",
           [](PyramidPerturbation& p, std::size_t i, const Array& a) {
             LevelGrid& g = p.level(i);
             if (a.ndim() != 3 || a.shape(0) != g.rows || a.shape(1) != g.cols || a.shape(2) != g.depth) {
               throw std::invalid_argument("set_level: array shape does not match the level");
             }
             std::copy(a.data(), a.data() + a.size(), g.values.begin());
           })
      .def("materialize",
           [](const PyramidPerturbation& p, double radius) { return image_array(materialize(p, radius), p.target_shape()); },
           py::arg("radius"))
      .def("project", [](const PyramidPerturbation& p, double radius) { return project(p, radius); }, py::arg("radius"))
      .def("max_abs", &PyramidPerturbation::max_abs)
      .def("__eq__", [](const PyramidPerturbation& a, const PyramidPerturbation& b) { return a == b; })
      .def("images_json", [](const PyramidPerturbation& p, double radius) {
        const PyramidImages imgs = export_pyramid_images(p, radius);
        nlohmann::json j;
        j["scales"] = imgs.scales;
        j["composite"] = imgs.composite.pixels;
        return j.dump();
      });

  m.def(
      "radius_at_epoch",
      [](double r_start, double r_end, int e_start, int e_end, int epoch, bool enabled) {
        RadiusSchedule s{.r_start = r_start, .r_end = r_end, .e_start = e_start, .e_end = e_end, .enabled = enabled};
        s.validate();
        return radius_at_epoch(s, epoch);
      },
      py::arg("r_start"), py::arg("r_end"), py::arg("e_start"), py::arg("e_end"), py::arg("epoch"),
      py::arg("enabled") = true);

  m.def(
      "cost_report_json",
      [](const std::string& method, int steps) { return cost_json_text(pass_cost_report(parse_method(method), steps)); },
      py::arg("method"), py::arg("attack_steps") = 0);

  m.def(
      "normalize_config",
      [](const std::string& yaml, const std::map<std::string, std::string>& overrides) {
        const ExperimentConfig c = config_from(yaml, overrides);
        c.validate();
        return serialize_config(c);
      },
      py::arg("yaml") = "", py::arg("overrides") = std::map<std::string, std::string>{});
  m.def(
      "config_hash", [](const std::string& yaml) { return config_hash(parse_config(yaml)); }, py::arg("yaml"));

  m.def(
      "train_json",
      [](const std::string& yaml, const std::map<std::string, std::string>& overrides, int stop_after) {
        const ExperimentConfig c = config_from(yaml, overrides);
        TrainOutcome o;
        {
          py::gil_scoped_release release;
          o = cmd_train(c, {.stop_after = stop_after});
        }
        nlohmann::json h = nlohmann::json::array();
        for (const auto& r : o.history) h.push_back(to_json(r));
        return nlohmann::json{{"dir", o.dir.string()},
                              {"resumed", o.resumed},
                              {"complete", o.complete},
                              {"history", h},
                              {"summary", o.summary}}
            .dump();
      },
      py::arg("yaml"), py::arg("overrides") = std::map<std::string, std::string>{}, py::arg("stop_after") = -1);

  m.def(
      "analyze_json",
      [](const std::string& checkpoint, const std::string& mode, const std::string& adversary, std::uint64_t seed) {
        std::ostringstream sink;
        AnalyzeOptions opts;
        opts.mode = mode;
        opts.adversary = adversary;
        opts.seed = seed;
        py::gil_scoped_release release;
        return cmd_analyze(checkpoint, opts, sink).dump();
      },
      py::arg("checkpoint"), py::arg("mode"), py::arg("adversary") = "auto", py::arg("seed") = 0);

  m.def(
      "ingest_json",
      [](const std::string& yaml, const std::map<std::string, std::string>& overrides) {
        std::ostringstream sink;
        return cmd_ingest(config_from(yaml, overrides), sink).dump();
      },
      py::arg("yaml") = "", py::arg("overrides") = std::map<std::string, std::string>{});

  m.def(
      "checkpoint_json",
      [](const std::string& path) {
        const Checkpoint ck = load_checkpoint(path);
        nlohmann::json h = nlohmann::json::array();
        for (const auto& r : ck.state.history) h.push_back(to_json(r));
        return nlohmann::json{{"method", ck.method},
                              {"next_epoch", ck.state.next_epoch},
                              {"global_step", ck.state.global_step},
                              {"parameter_hash", parameter_hash(*ck.state.model)},
                              {"has_universal", ck.state.universal.has_value()},
                              {"history", h},
                              {"config", ck.config_yaml}}
            .dump();
      },
      py::arg("path"));
}
