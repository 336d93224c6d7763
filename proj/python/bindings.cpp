#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "texturesmith/composite.hpp"
#include "texturesmith/config.hpp"
#include "texturesmith/error.hpp"
#include "texturesmith/image_io.hpp"
#include "texturesmith/pipeline.hpp"
#include "texturesmith/segment.hpp"
#include "texturesmith/synth.hpp"

namespace py = pybind11;
namespace ts = texturesmith;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

ts::ImageTensor to_tensor(const FloatArray& a) {
  if (a.ndim() != 3) throw py::value_error("image must be a (channels, height, width) array");
  const ts::Shape shape{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                        static_cast<std::size_t>(a.shape(2))};
  return ts::ImageTensor(shape, std::vector<float>(a.data(), a.data() + a.size()));
}

FloatArray to_array(const ts::ImageTensor& t) {
  FloatArray out({t.channels(), t.height(), t.width()});
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

ts::Mask to_mask(const DoubleArray& a) {
  if (a.ndim() != 2) throw py::value_error("mask must be a (height, width) array");
  ts::Mask m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.values.begin());
  return m;
}

DoubleArray to_array(const ts::Mask& m) {
  DoubleArray out({m.height, m.width});
  std::copy(m.values.begin(), m.values.end(), out.mutable_data());
  return out;
}

std::vector<std::uint8_t> to_bytes(const py::bytes& b) {
  const std::string s = b;
  return {s.begin(), s.end()};
}

py::bytes from_bytes(const std::vector<std::uint8_t>& v) {
  return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

std::vector<ts::Pixel> to_pixels(const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  std::vector<ts::Pixel> out;
  for (const auto& [r, c] : pairs) out.push_back({r, c});
  return out;
}

ts::UnaryField to_unary(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 3) throw py::value_error("unary must be a (height, width, labels) array");
  return ts::UnaryField{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                        static_cast<std::size_t>(a.shape(2)), std::vector<float>(a.data(), a.data() + a.size())};
}

}  // namespace

PYBIND11_MODULE(_texturesmith, m) {
  m.doc() = "Gram-matrix texture synthesis with CRF segmentation";

  auto base = py::register_exception<ts::Error>(m, "Error");
  py::register_exception<ts::ShapeError>(m, "ShapeError", base);
  py::register_exception<ts::FormatError>(m, "FormatError", base);
  py::register_exception<ts::ConfigError>(m, "ConfigError", base);
  py::register_exception<ts::IoError>(m, "IoError", base);
  py::register_exception<ts::NumericalError>(m, "NumericalError", base);

  py::class_<ts::NetworkSpec>(m, "Network")
      .def_readonly("input_channels", &ts::NetworkSpec::input_channels)
      .def("__len__", [](const ts::NetworkSpec& n) { return n.layers.size(); })
      .def("layer_kinds",
           [](const ts::NetworkSpec& n) {
             std::vector<std::string> kinds;
             for (const auto& l : n.layers) kinds.emplace_back(ts::kind_name(ts::kind_of(l)));
             return kinds;
           })
      .def("default_style_layers", &ts::default_style_layers)
      .def("serialize", [](const ts::NetworkSpec& n) { return from_bytes(ts::serialize_weights(n)); })
      .def("__eq__", [](const ts::NetworkSpec& a, const ts::NetworkSpec& b) { return a == b; });

  m.def("seeded_test_network", &ts::seeded_test_network, py::arg("seed"), py::arg("depth"), py::arg("channels"),
        py::arg("input_channels") = 3);
  m.def("vgg19_network", &ts::vgg19_network, py::arg("seed"));
  m.def("load_weights", [](const py::bytes& b) { return ts::load_weights(to_bytes(b)); });

  py::class_<ts::GramSet>(m, "GramSet")
      .def_property_readonly("layers", &ts::GramSet::layers)
      .def("gram",
           [](const ts::GramSet& g, std::size_t i) {
             const auto& e = g.entries.at(i);
             FloatArray out({e.gram.n, e.gram.n});
             std::copy(e.gram.values.begin(), e.gram.values.end(), out.mutable_data());
             return out;
           })
      .def("__len__", [](const ts::GramSet& g) { return g.entries.size(); })
      .def("serialize", [](const ts::GramSet& g) { return from_bytes(ts::serialize_gram_set(g)); })
      .def("__eq__", [](const ts::GramSet& a, const ts::GramSet& b) { return a == b; });
  m.def("load_gram_set", [](const py::bytes& b) { return ts::load_gram_set(to_bytes(b)); });

  m.def(
      "style_descriptor",
      [](const ts::NetworkSpec& net, const FloatArray& image, std::optional<std::vector<std::size_t>> layers,
         std::optional<std::vector<float>> weights) {
        const auto l = layers ? *layers : ts::default_style_layers(net);
        const auto w = weights ? *weights : ts::uniform_layer_weights(l.size());
        return ts::style_descriptor(net, to_tensor(image), l, w);
      },
      py::arg("net"), py::arg("image"), py::arg("layers") = py::none(), py::arg("weights") = py::none());

  m.def(
      "texture_loss",
      [](const ts::NetworkSpec& net, const FloatArray& image, const ts::GramSet& target) {
        return ts::evaluate_texture(to_tensor(image), target, net).loss;
      },
      py::arg("net"), py::arg("image"), py::arg("target"));

  m.def(
      "synthesize",
      [](const FloatArray& content, const ts::GramSet& target, const ts::NetworkSpec& net, std::size_t max_iterations,
         double step_size, double tol, bool noise_init, std::uint64_t seed) {
        ts::SynthesisConfig cfg;
        cfg.max_iterations = max_iterations;
        cfg.step_size = step_size;
        cfg.convergence_tol = tol;
        cfg.init_mode = noise_init ? ts::InitMode::WhiteNoise : ts::InitMode::ContentImage;
        cfg.rng_seed = seed;
        cfg.layer_indices = target.layers();
        for (const auto& e : target.entries) cfg.layer_weights.push_back(e.weight);
        ts::SynthesisResult r;
        {
          py::gil_scoped_release release;
          r = ts::synthesize(to_tensor(content), target, net, cfg);
        }
        std::vector<double> losses;
        for (const auto& rec : r.trace.records) losses.push_back(rec.total);
        return py::make_tuple(to_array(r.image), losses, ts::stop_reason_name(r.stop));
      },
      py::arg("content"), py::arg("target"), py::arg("net"), py::arg("max_iterations") = 500,
      py::arg("step_size") = 1.0e7, py::arg("tol") = 1.0e-6, py::arg("noise_init") = false, py::arg("seed") = 0);

  m.def(
      "color_model_unary",
      [](const FloatArray& image, const std::vector<std::pair<std::size_t, std::size_t>>& fg,
         const std::vector<std::pair<std::size_t, std::size_t>>& bg, double sigma) {
        const ts::UnaryField u = ts::color_model_unary(to_tensor(image), to_pixels(fg), to_pixels(bg), sigma);
        FloatArray out({u.height, u.width, u.n_labels});
        std::copy(u.values.begin(), u.values.end(), out.mutable_data());
        return out;
      },
      py::arg("image"), py::arg("fg_seeds"), py::arg("bg_seeds"), py::arg("sigma") = 0.1);

  m.def(
      "run_crf",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& unary, const FloatArray& image,
         std::size_t iterations, double w_appearance, double theta_alpha, double theta_beta, double w_smooth,
         double theta_gamma) {
        const ts::PairwiseParams p{w_appearance, theta_alpha, theta_beta, w_smooth, theta_gamma};
        const ts::CrfResult r = ts::run_crf(to_unary(unary), to_tensor(image), p, iterations);
        py::array_t<std::uint32_t> labels({r.labels.height, r.labels.width});
        std::copy(r.labels.labels.begin(), r.labels.labels.end(), labels.mutable_data());
        return labels;
      },
      py::arg("unary"), py::arg("image"), py::arg("iterations") = 5, py::arg("w_appearance") = 3.0,
      py::arg("theta_alpha") = 8.0, py::arg("theta_beta") = 0.1, py::arg("w_smooth") = 1.0,
      py::arg("theta_gamma") = 3.0);

  m.def(
      "feather_mask",
      [](const DoubleArray& mask, std::size_t radius) { return to_array(ts::feather_mask(to_mask(mask), {radius})); },
      py::arg("mask"), py::arg("radius") = 2);

  m.def(
      "composite",
      [](const std::vector<FloatArray>& images, const std::vector<DoubleArray>& masks) {
        std::vector<ts::ImageTensor> imgs;
        std::vector<ts::Mask> ms;
        for (const auto& i : images) imgs.push_back(to_tensor(i));
        for (const auto& mm : masks) ms.push_back(to_mask(mm));
        return to_array(ts::composite(imgs, ts::normalize_soft_masks(ms)));
      },
      py::arg("images"), py::arg("masks"));

  m.def("load_image", [](const std::filesystem::path& p) { return to_array(ts::load_image(p)); });
  m.def("save_image", [](const FloatArray& a, const std::filesystem::path& p) { ts::save_image(to_tensor(a), p); });

  m.def(
      "run_pipeline",
      [](const std::filesystem::path& config, std::optional<std::filesystem::path> out_dir,
         std::optional<std::uint64_t> seed, std::optional<std::filesystem::path> cache_dir, bool segment_only) {
        ts::RunOptions o;
        o.out_dir = out_dir;
        o.seed = seed;
        o.cache_dir = cache_dir;
        o.segment_only = segment_only;
        const ts::PipelineConfig cfg = ts::load_config(config);
        py::gil_scoped_release release;
        return ts::run_pipeline(cfg, o).to_json();
      },
      py::arg("config"), py::arg("out_dir") = py::none(), py::arg("seed") = py::none(),
      py::arg("cache_dir") = py::none(), py::arg("segment_only") = false);
}
