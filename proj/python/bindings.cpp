// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "pairforge/checkpoint.hpp"
#include "pairforge/cli.hpp"
#include "pairforge/io.hpp"
#include "pairforge/source_gen.hpp"

namespace py = pybind11;
using namespace pairforge;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

py::array_t<float> to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
  py::array_t<float> out(shape);
  std::copy(t.data.begin(), t.data.end(), out.mutable_data());
  return out;
}

py::array_t<float> to_numpy(const std::vector<float>& v) {
  py::array_t<float> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Tensor image_from_numpy(const FloatArray& a) {
  if (a.ndim() != 3 || a.shape(0) != kImageChannels || a.shape(1) != kImageSize || a.shape(2) != kImageSize) {
    throw py::value_error("image must have shape (3, 16, 16)");
  }
  return Tensor({kImageChannels, kImageSize, kImageSize}, {a.data(), a.data() + a.size()});
}

std::vector<float> vector_from_numpy(const FloatArray& a, std::size_t dim, const char* what) {
  if (a.ndim() != 1 || static_cast<std::size_t>(a.shape(0)) != dim) {
    throw py::value_error(std::string(what) + " must have shape (" + std::to_string(dim) + ",)");
  }
  return {a.data(), a.data() + a.size()};
}

struct PyGan {
  GanParams<float> params;
  Vocab vocab;
  CheckpointInfo info;
};

struct PyCaptioner {
  CaptionerParams<float> params;
  Vocab vocab;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of pairforge";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DependencyError>(m, "DependencyError", PyExc_FileNotFoundError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> full{"pairforge"};
        full.insert(full.end(), args.begin(), args.end());
        std::vector<const char*> argv;
        for (const auto& a : full) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one pairforge subcommand in-process. Returns (exit_code, stdout, stderr).");

  m.def(
      "generate_corpus",
      [](std::size_t num_samples, std::uint64_t seed, std::size_t captions_per_image, double noise_amplitude) {
        CorpusConfig cfg;
        cfg.num_samples = num_samples;
        cfg.seed = seed;
        cfg.captions_per_image = captions_per_image;
        cfg.noise_amplitude = noise_amplitude;
        cfg.validate();
        py::list out;
        for (const auto& s : generate_corpus(cfg)) {
          py::dict d;
          d["image"] = to_numpy(s.image);
          d["captions"] = s.captions;
          d["class_id"] = s.class_id;
          d["color"] = cfg.colors[s.color].name;
          d["shape"] = cfg.shapes[s.shape];
          out.append(std::move(d));
        }
        return out;
      },
      py::arg("num_samples") = 2000, py::arg("seed") = 0, py::arg("captions_per_image") = 3,
      py::arg("noise_amplitude") = 0.05);

  m.def(
      "dominant_color", [](const FloatArray& image) { return dominant_attributes(image_from_numpy(image)).color; },
      py::arg("image"), "Nearest palette color of the image's foreground.");

  m.def(
      "fit_gmm",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> data, std::size_t k, std::size_t max_iter,
         double tol, std::uint64_t seed) {
        if (data.ndim() != 2) throw py::value_error("data must be a 2-D array");
        const auto n = static_cast<std::size_t>(data.shape(0)), d = static_cast<std::size_t>(data.shape(1));
        std::vector<std::vector<double>> rows(n);
        for (std::size_t i = 0; i < n; ++i) rows[i].assign(data.data() + i * d, data.data() + (i + 1) * d);
        GmmFitResult fit;
        {
          py::gil_scoped_release release;
          fit = fit_gmm(rows, k, GmmFitOptions{max_iter, tol, seed});
        }
        py::dict out;
        out["weights"] = fit.model.weights;
        out["means"] = fit.model.means;
        out["variances"] = fit.model.variances;
        out["log_likelihood"] = fit.log_likelihood;
        out["reinitialized"] = fit.reinitialized;
        return out;
      },
      py::arg("data"), py::arg("k"), py::arg("max_iter") = 200, py::arg("tol") = 1e-6, py::arg("seed") = 0,
      "Diagonal-covariance mixture fitted by EM.");

  py::class_<PyGan>(m, "Gan")
      .def_static(
          "load",
          [](const std::filesystem::path& path) {
            const Checkpoint ckpt = load_checkpoint(path);
            PyGan g{gan_from_checkpoint(ckpt), {}, decode_info(ckpt.metadata)};
            g.vocab = Vocab(g.info.vocab_words);
            return g;
          },
          py::arg("path"))
      .def_property_readonly("epoch", [](const PyGan& g) { return g.info.epoch; })
      .def_property_readonly("corpus_hash", [](const PyGan& g) { return g.info.corpus_hash; })
      .def(
          "encode", [](const PyGan& g, const std::string& caption) {
            return to_numpy(psi_encode(g.params, encode_caption(g.vocab, caption)));
          },
          py::arg("caption"), "Text embedding psi(caption), shape (32,).")
      .def(
          "generate",
          [](const PyGan& g, const FloatArray& psi, std::uint64_t noise_seed) {
            const auto e = vector_from_numpy(psi, kTextEmbedDim, "psi");
            return to_numpy(generate_image(g.params, sample_noise(noise_seed), e));
          },
          py::arg("psi"), py::arg("noise_seed") = 0, "Image in [-1, 1], shape (3, 16, 16).")
      .def(
          "phi", [](const PyGan& g, const FloatArray& image) {
            return to_numpy(phi_extract(g.params, image_from_numpy(image)));
          },
          py::arg("image"), "Image embedding phi(image), shape (1024,).")
      .def(
          "discriminate",
          [](const PyGan& g, const FloatArray& image, const FloatArray& psi) {
            const auto e = vector_from_numpy(psi, kTextEmbedDim, "psi");
            return discriminate(g.params, image_from_numpy(image), e);
          },
          py::arg("image"), py::arg("psi"));

  py::class_<PyCaptioner>(m, "Captioner")
      .def_static(
          "load",
          [](const std::filesystem::path& path) {
            const Checkpoint ckpt = load_checkpoint(path);
            return PyCaptioner{captioner_from_checkpoint(ckpt), Vocab(decode_info(ckpt.metadata).vocab_words)};
          },
          py::arg("path"))
      .def(
          "caption",
          [](const PyCaptioner& c, const FloatArray& phi, std::size_t max_len) {
            const auto e = vector_from_numpy(phi, kImageEmbedDim, "phi");
            return decode_tokens(c.vocab, greedy_decode(c.params, e, max_len));
          },
          py::arg("phi"), py::arg("max_len") = kMaxCaptionTokens, "Greedy caption for an image embedding.");
}
