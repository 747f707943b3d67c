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

// afran: synth | train | eval | detect | tile | complexity
//
// Exit codes: 0 success, 2 configuration or usage error, 3 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "afran/pipeline.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace afran;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string checkpoint;
  std::string split = "test";
  int tile = 0;
  int overlap = 0;
  std::string input;  // dataset directory or image, per subcommand
  bool no_overlay = false;
};

int worker_threads() {
  const char* env = std::getenv("AFRAN_THREADS");
  if (!env || !*env) return std::max(1u, std::thread::hardware_concurrency());
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError(std::string("AFRAN_THREADS must be a positive integer, got '") + env + "'");
  return static_cast<int>(n);
}

RunConfig run_config(const Options& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.seed) {
    cfg.train.seed = *o.seed;
    cfg.data.scene.seed = *o.seed;
  }
  cfg.model.validate();
  cfg.train.validate();
  return cfg;
}

fs::path out_dir(const Options& o) {
  if (o.out.empty()) throw ConfigError("--out is required");
  fs::create_directories(o.out);
  return o.out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

std::unique_ptr<Model> model_for(const Options& o) {
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  if (o.config.empty()) return load_model(o.checkpoint);
  // Explicit config: the checkpoint must fit it exactly.
  auto model = std::make_unique<Model>(run_config(o).model, 0);
  try {
    load_parameters(model->store(), load_checkpoint(o.checkpoint));
  } catch (const CheckpointError& e) {
    const std::string what = e.what();
    if (what.rfind("shape mismatch", 0) == 0 || what.rfind("checkpoint lacks", 0) == 0) throw ConfigError(what);
    throw;
  }
  return model;
}

int cmd_synth(const Options& o) {
  const RunConfig cfg = run_config(o);
  const fs::path out = out_dir(o);
  const DataConfig& d = cfg.data;
  synthesize_dataset(out, d.scene, d.num_scenes, d.scene.seed, d.train_count, d.val_count, d.test_count);
  const int total = d.train_count + d.val_count + d.test_count > 0 ? d.train_count + d.val_count + d.test_count
                                                                   : d.num_scenes;
  std::cout << "wrote " << total << " scenes to " << out.string() << "\n";
  return 0;
}

int cmd_train(const Options& o) {
  const RunConfig cfg = run_config(o);
  if (o.input.empty()) throw ConfigError("train needs a dataset directory");
  const Dataset data = Dataset::open(o.input);
  TrainOptions opt;
  opt.out_dir = out_dir(o);
  if (!o.checkpoint.empty()) opt.resume = fs::path(o.checkpoint);
  opt.threads = worker_threads();
  opt.progress = &std::cerr;
  write_text(opt.out_dir / "config.json", config_to_json(cfg));
  const TrainSummary s = train_model(cfg, data, opt);
  std::cout << "epochs " << s.epochs_completed << "  steps " << s.steps << "  best val AP50 " << s.best_ap50 << "\n";
  return 0;
}

int cmd_eval(const Options& o) {
  if (o.input.empty()) throw ConfigError("eval needs a dataset directory");
  const auto model = model_for(o);
  const fs::path out = out_dir(o);
  const Dataset data = Dataset::open(o.input);
  SplitEvaluation ev = evaluate_split(*model, data, o.split);
  const NetConfig& nc = model->config();
  ev.report.params_total = params_count(nc).params_total;
  ev.report.mac_total = mac_count(nc, nc.input_size).mac_total;
  write_text(out / "report.json", report_to_json(ev.report));
  write_text(out / "detections.jsonl", detections_to_jsonl(ev.image_ids, ev.detections));
  nlohmann::ordered_json aq = {{"mean_max_iou_initial", ev.anchors.initial},
                               {"mean_max_iou_refined", ev.anchors.refined},
                               {"num_gt", ev.anchors.num_gt}};
  write_text(out / "anchor_quality.json", aq.dump(2) + "\n");
  emit_curves(ev.report, out);
  std::cout << report_to_json(ev.report);
  return 0;
}

int cmd_detect(const Options& o) {
  if (o.input.empty()) throw ConfigError("detect needs an image path");
  if (o.tile < 0 || o.overlap < 0 || (o.tile > 0 && o.overlap >= o.tile))
    throw ConfigError("need --tile > --overlap >= 0");
  const auto model = model_for(o);
  const fs::path out = out_dir(o);
  const Image scene = read_png(o.input);
  const auto dets = detect_scene(*model, scene, o.tile, o.overlap);
  const std::string id = fs::path(o.input).stem().string();
  write_text(out / "detections.jsonl", detections_to_jsonl({id}, {dets}));
  if (!o.no_overlay) {
    const fs::path copy = out / (id + ".png");
    if (!fs::exists(copy) || !fs::equivalent(copy, o.input)) write_png(copy, scene);
    write_text(out / (id + "_overlay.svg"), overlay_svg(copy.filename().string(), scene.width, scene.height, dets));
  }
  std::cout << dets.size() << " detections\n";
  return 0;
}

int cmd_tile(const Options& o) {
  if (o.input.empty()) throw ConfigError("tile needs an image path");
  const int tile = o.tile > 0 ? o.tile : 640;
  if (o.overlap < 0 || o.overlap >= tile) throw ConfigError("need --tile > --overlap >= 0");
  const fs::path out = out_dir(o);
  const Tiles tiles = tile_large_scene(read_png(o.input), tile, o.overlap);
  nlohmann::ordered_json placements = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < tiles.tiles.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "tile_%04zu.png", i);
    write_png(out / name, tiles.tiles[i]);
    placements.push_back({{"file", name}, {"x0", tiles.placements[i].x0}, {"y0", tiles.placements[i].y0}});
  }
  write_text(out / "placements.json", placements.dump(2) + "\n");
  std::cout << tiles.tiles.size() << " tiles\n";
  return 0;
}

int cmd_complexity(const Options& o) {
  const RunConfig cfg = run_config(o);
  Complexity c = mac_count(cfg.model, cfg.model.input_size);
  std::cout << complexity_table(c);
  const std::string js = complexity_to_json(c);
  if (!o.out.empty()) write_text(out_dir(o) / "complexity.json", js);
  std::cout << js;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AFRAN SAR aircraft detector"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "overrides the configured seeds");
    sub->add_option("--out", o.out, "output directory");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth);

  CLI::App* train = app.add_subcommand("train", "train on a dataset directory");
  add_common(train);
  train->add_option("dataset", o.input, "dataset directory")->required();
  train->add_option("--checkpoint", o.checkpoint, "resume from this checkpoint");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  add_common(eval);
  eval->add_option("dataset", o.input, "dataset directory")->required();
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint")->required();
  eval->add_option("--split", o.split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));

  CLI::App* detect = app.add_subcommand("detect", "detect aircraft in an image or large scene");
  add_common(detect);
  detect->add_option("image", o.input, "8-bit grayscale PNG")->required();
  detect->add_option("--checkpoint", o.checkpoint, "checkpoint")->required();
  detect->add_option("--tile", o.tile, "tile side; 0 uses the network input size");
  detect->add_option("--overlap", o.overlap, "tile overlap in pixels");
  detect->add_flag("--no-overlay", o.no_overlay, "skip the SVG overlay");

  CLI::App* tile = app.add_subcommand("tile", "cut a scene into tiles");
  add_common(tile);
  tile->add_option("image", o.input, "8-bit grayscale PNG")->required();
  tile->add_option("--tile", o.tile, "tile side (default 640)");
  tile->add_option("--overlap", o.overlap, "tile overlap in pixels");

  CLI::App* complexity = app.add_subcommand("complexity", "per-layer params and MAC");
  add_common(complexity);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*detect) return cmd_detect(o);
    if (*tile) return cmd_tile(o);
    if (*complexity) return cmd_complexity(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
