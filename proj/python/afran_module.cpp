/* Copyright 2026 The AFRAN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "afran/pipeline.hpp"

namespace py = pybind11;
using namespace afran;

namespace {

Image to_image(py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D uint8 array");
  Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::memcpy(img.pixels.data(), a.data(), img.pixels.size());
  return img;
}

py::array_t<std::uint8_t> to_array(const Image& img) {
  py::array_t<std::uint8_t> a({img.height, img.width});
  std::memcpy(a.mutable_data(), img.pixels.data(), img.pixels.size());
  return a;
}

py::tuple box_tuple(const Box& b) { return py::make_tuple(b.x1, b.y1, b.x2, b.y2); }

py::list detections_list(const std::vector<Detection>& dets) {
  py::list out;
  for (const Detection& d : dets) {
    py::dict row;
    row["box"] = box_tuple(d.box);
    row["score"] = d.score;
    row["label"] = d.label;
    out.append(row);
  }
  return out;
}

RunConfig config_from(const std::string& text) { return text.empty() ? RunConfig{} : parse_config(text); }

}  // namespace

PYBIND11_MODULE(_afran, m) {
  m.doc() = "Native core of the afran detector";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_ValueError);

  m.def("default_config", [] { return config_to_json(RunConfig{}); }, "Default run configuration as JSON text.");
  m.def("normalize_config", [](const std::string& text) { return config_to_json(parse_config(text)); },
        py::arg("config_json"), "Strictly parses a config and returns it with defaults filled in.");

  m.def(
      "generate_scene",
      [](int size, std::uint64_t seed, int min_aircraft, int max_aircraft) {
        SceneSpec s;
        s.size = size;
        s.seed = seed;
        s.min_aircraft = min_aircraft;
        s.max_aircraft = max_aircraft;
        const Scene sc = generate_scene(s);
        py::list boxes;
        for (const Box& b : sc.annotation.boxes) boxes.append(box_tuple(b));
        return py::make_tuple(to_array(sc.image), boxes);
      },
      py::arg("size") = 640, py::arg("seed") = 0, py::arg("min_aircraft") = 1, py::arg("max_aircraft") = 6);

  m.def(
      "synthesize",
      [](const std::filesystem::path& root, const std::string& config_json) {
        const RunConfig cfg = config_from(config_json);
        const DataConfig& d = cfg.data;
        py::gil_scoped_release release;
        synthesize_dataset(root, d.scene, d.num_scenes, d.scene.seed, d.train_count, d.val_count, d.test_count);
      },
      py::arg("root"), py::arg("config_json") = "");

  m.def(
      "train",
      [](const std::filesystem::path& dataset, const std::filesystem::path& out_dir, const std::string& config_json,
         int threads) {
        const RunConfig cfg = config_from(config_json);
        TrainOptions opt;
        opt.out_dir = out_dir;
        opt.threads = threads;
        TrainSummary s;
        {
          py::gil_scoped_release release;
          s = train_model(cfg, Dataset::open(dataset), opt);
        }
        py::dict d;
        d["epochs_completed"] = s.epochs_completed;
        d["steps"] = s.steps;
        d["first_loss"] = s.first_loss;
        d["first_epoch_loss"] = s.first_epoch_loss;
        d["last_epoch_loss"] = s.last_epoch_loss;
        d["best_ap50"] = s.best_ap50;
        return d;
      },
      py::arg("dataset"), py::arg("out_dir"), py::arg("config_json") = "", py::arg("threads") = 1);

  m.def(
      "evaluate",
      [](const std::filesystem::path& checkpoint, const std::filesystem::path& dataset, const std::string& split) {
        std::string report;
        {
          py::gil_scoped_release release;
          const auto model = load_model(checkpoint);
          report = report_to_json(evaluate_split(*model, Dataset::open(dataset), split).report);
        }
        return report;
      },
      py::arg("checkpoint"), py::arg("dataset"), py::arg("split") = "test", "Returns the report as JSON text.");

  m.def(
      "detect",
      [](const std::filesystem::path& checkpoint, py::array_t<std::uint8_t> image, int tile, int overlap) {
        const Image img = to_image(image);
        std::vector<Detection> dets;
        {
          py::gil_scoped_release release;
          dets = detect_scene(*load_model(checkpoint), img, tile, overlap);
        }
        return detections_list(dets);
      },
      py::arg("checkpoint"), py::arg("image"), py::arg("tile") = 0, py::arg("overlap") = 0);

  m.def(
      "tile",
      [](py::array_t<std::uint8_t> image, int tile, int overlap) {
        const Tiles t = tile_large_scene(to_image(image), tile, overlap);
        py::list tiles, origins;
        for (std::size_t i = 0; i < t.tiles.size(); ++i) {
          tiles.append(to_array(t.tiles[i]));
          origins.append(py::make_tuple(t.placements[i].x0, t.placements[i].y0));
        }
        return py::make_tuple(tiles, origins);
      },
      py::arg("image"), py::arg("tile") = 640, py::arg("overlap") = 0);

  m.def(
      "complexity",
      [](const std::string& config_json) {
        const NetConfig net = config_from(config_json).model;
        return complexity_to_json(mac_count(net, net.input_size));
      },
      py::arg("config_json") = "", "Per-layer parameter and MAC counts as JSON text.");

  m.def("iou", [](py::tuple a, py::tuple b) {
    auto box = [](py::tuple t) { return Box{t[0].cast<double>(), t[1].cast<double>(), t[2].cast<double>(), t[3].cast<double>()}; };
    return iou(box(a), box(b));
  });
}
