#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "traffic/checkpoint.hpp"
#include "traffic/controllers.hpp"
#include "traffic/density.hpp"
#include "traffic/image.hpp"
#include "traffic/loss.hpp"
#include "traffic/metrics.hpp"
#include "traffic/model.hpp"
#include "traffic/scenario.hpp"
#include "traffic/simulator.hpp"

namespace py = pybind11;
using namespace traffic;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// (H, W) arrays are read as one channel.
Tensor tensor_from(const Array& a) {
    if (a.ndim() != 2 && a.ndim() != 3) throw py::value_error("expected an (H, W) or (C, H, W) array");
    Shape shape;
    if (a.ndim() == 2) shape = {1, static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1))};
    else shape = {static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                  static_cast<std::size_t>(a.shape(2))};
    return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array array_from(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    Array out(shape);
    std::copy(t.data(), t.data() + t.size(), out.mutable_data());
    return out;
}

MaskPolygon polygon_from(const std::vector<std::pair<double, double>>& vertices) {
    MaskPolygon m;
    for (auto [x, y] : vertices) m.vertices.push_back({x, y});
    return m;
}

py::dict report_dict(const MetricsReport& r) {
    py::dict d;
    d["accuracy"] = r.accuracy;
    d["macro_f1"] = r.macro_f1;
    d["top2_accuracy"] = r.top2_accuracy;
    py::list confusion;
    for (std::size_t t = 0; t < r.confusion.classes(); ++t) {
        py::list row;
        for (std::size_t p = 0; p < r.confusion.classes(); ++p) row.append(r.confusion.at(t, p));
        confusion.append(row);
    }
    d["confusion"] = confusion;
    py::list per_class;
    for (const auto& c : r.per_class) {
        per_class.append(py::dict(py::arg("precision") = c.precision, py::arg("recall") = c.recall,
                                  py::arg("f1") = c.f1, py::arg("support") = c.support));
    }
    d["per_class"] = per_class;
    return d;
}

struct Model {
    Checkpoint ckpt;
    Network net;

    explicit Model(const std::filesystem::path& path) : ckpt(load_checkpoint(path)), net(ckpt.config) {}

    Array predict(const Array& image) const { return array_from(net.predict(ckpt.params, tensor_from(image))); }

    Array predict_file(const std::filesystem::path& path,
                       const std::optional<std::vector<std::pair<double, double>>>& mask) const {
        const auto& s = ckpt.config.input_shape;
        Tensor planes = to_tensor(read_image(path), s[0] == 1);
        if (mask) planes = apply_mask(planes, polygon_from(*mask));
        return array_from(net.predict(ckpt.params, resize_bilinear(planes, s[1], s[2])));
    }
};

std::shared_ptr<const Controller> make_controller(const std::string& kind, const Scenario& scn,
                                                  const std::vector<double>& greens, double max_red) {
    std::shared_ptr<const Controller> c;
    if (kind == "fixed") c = std::make_shared<FixedTimeController>(greens.empty() ? default_fixed_greens(scn) : greens);
    else if (kind == "lqf") c = std::make_shared<LqfController>();
    else if (kind == "density") c = std::make_shared<DensityAdaptiveController>();
    else throw py::value_error("controller must be 'fixed', 'lqf' or 'density'");
    if (max_red > 0.0) c = std::make_shared<MaxRedGuard>(c, max_red);
    return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Traffic density classification and junction simulation";

    py::list names;
    for (auto c : kDensityClasses) names.append(std::string(to_string(c)));
    m.attr("DENSITY_CLASSES") = names;

    m.def("classify_count", [](double cars) { return std::string(to_string(classify_count(cars))); },
          py::arg("car_count"), "Density class for a car count");
    m.def("class_weights", [](const std::vector<std::size_t>& counts) { return compute_class_weights(counts).alpha; },
          py::arg("counts"), "Loss multipliers from per-class sample counts");
    m.def("evaluate",
          [](const std::vector<std::vector<double>>& predictions, const std::vector<std::size_t>& truths) {
              return report_dict(evaluate(predictions, truths));
          },
          py::arg("predictions"), py::arg("truths"), "Accuracy, macro-F1, top-2 and the confusion matrix");

    m.def("load_image",
          [](const std::filesystem::path& path, std::size_t size, bool grayscale) {
              return array_from(preprocess(read_image(path), size, size, grayscale));
          },
          py::arg("path"), py::arg("size") = 128, py::arg("grayscale") = true,
          "Reads and resizes an image to a (C, size, size) array in [0, 1]");
    m.def("apply_mask",
          [](const Array& image, const std::vector<std::pair<double, double>>& vertices) {
              return array_from(apply_mask(tensor_from(image), polygon_from(vertices)));
          },
          py::arg("image"), py::arg("vertices"), "Zeroes every pixel outside the polygon");

    py::class_<Model>(m, "Model")
        .def(py::init<const std::filesystem::path&>(), py::arg("path"))
        .def_property_readonly("input_shape", [](const Model& x) { return x.ckpt.config.input_shape; })
        .def_property_readonly("class_count", [](const Model& x) { return x.ckpt.config.class_count; })
        .def("predict", &Model::predict, py::arg("image"), "Class probabilities for a preprocessed array")
        .def("predict_file", &Model::predict_file, py::arg("path"), py::arg("mask") = py::none(),
             "Reads, optionally masks, resizes and classifies an image file");

    py::class_<Scenario>(m, "Scenario")
        .def_static("reference", &reference_scenario)
        .def_static("asymmetric", &asymmetric_two_lane_scenario)
        .def_static("load", &load_scenario, py::arg("path"))
        .def_static("from_json", [](const std::string& text) { return scenario_from_json(text); })
        .def("to_json", &scenario_to_json)
        .def_property_readonly("lanes", [](const Scenario& s) { return s.lanes.size(); })
        .def_property_readonly("phases", [](const Scenario& s) { return s.phases.size(); })
        .def_property_readonly("horizon", [](const Scenario& s) { return s.horizon; });

    m.def("simulate",
          [](const Scenario& scn, const std::string& controller, std::uint64_t seed, const std::vector<double>& greens,
             double max_red) {
              const auto c = make_controller(controller, scn, greens, max_red);
              const DelayStats s = run_scenario(scn, *c, seed);
              py::dict d;
              d["controller"] = c->name();
              d["mean_delay"] = s.mean_delay;
              d["max_delay"] = s.max_delay;
              d["throughput"] = s.throughput;
              d["arrivals"] = s.arrivals;
              d["still_queued"] = s.still_queued;
              d["max_red"] = s.max_red_observed;
              d["switches"] = s.switches;
              return d;
          },
          py::arg("scenario"), py::arg("controller") = "fixed", py::arg("seed") = 1,
          py::arg("greens") = std::vector<double>{}, py::arg("max_red") = 0.0,
          "Runs one controller over the scenario horizon");
}
