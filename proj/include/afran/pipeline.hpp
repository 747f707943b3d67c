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

#pragma once

// Training, evaluation and detection drivers shared by the CLI, the Python
// module and the acceptance harness.

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "afran/checkpoint.hpp"
#include "afran/config.hpp"
#include "afran/detector.hpp"
#include "afran/metrics.hpp"
#include "afran/network.hpp"
#include "afran/synth.hpp"

namespace afran {

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Warmup from lr/1000 over warmup_epochs, then step decay by gamma.
double learning_rate(const TrainConfig& cfg, int epoch, long step_in_epoch, long steps_per_epoch);

struct Sample {
  Image image;
  Annotation annotation;
};

/// Optionally augments, then resizes to the network input.
Sample prepare_sample(const Image& image, const Annotation& ann, int input_size, bool augment,
                      std::uint64_t seed, const AugmentConfig& aug);

struct TrainOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume;
  int threads = 1;
  std::ostream* progress = nullptr;
  int stop_after_epochs = -1;  // run at most this many epochs in this call
};

struct TrainSummary {
  int epochs_completed = 0;
  long steps = 0;
  double first_loss = 0;
  double last_epoch_loss = 0;
  double first_epoch_loss = 0;
  double best_ap50 = -1;
};

/// Writes train_log.csv, epochs.csv, loss_curve.svg, last.ckpt and best.ckpt
/// into out_dir. Throws TrainingAborted on a non-finite loss.
TrainSummary train_model(const RunConfig& cfg, const Dataset& data, const TrainOptions& opt);

/// Builds a model and loads weights; the checkpoint's model config wins.
std::unique_ptr<Model> load_model(const std::filesystem::path& checkpoint);
Checkpoint make_checkpoint(const Model& model, const std::string& state_json,
                           const std::vector<Tensor>* momentum = nullptr,
                           const std::vector<Tensor>* second_moment = nullptr);

/// Images are resized to the network input and detections mapped back to
/// the source pixel frame.
std::vector<std::vector<Detection>> run_detector(const Model& model, const std::vector<Image>& images,
                                                 int batch = 4);

struct SplitEvaluation {
  EvalReport report;
  std::vector<std::string> image_ids;
  std::vector<std::vector<Detection>> detections;
  std::vector<std::vector<Box>> gts;
  AnchorQuality anchors;  // averaged over gts of the split
};

SplitEvaluation evaluate_split(const Model& model, const Dataset& data, const std::string& split,
                               int batch = 4);

std::string detections_to_jsonl(const std::vector<std::string>& ids,
                                const std::vector<std::vector<Detection>>& dets);
/// SVG overlay of boxes and scores on top of the image at `image_href`.
std::string overlay_svg(const std::string& image_href, int width, int height,
                        const std::vector<Detection>& dets);

/// Full-scene inference; images larger than `tile` (or the input size when
/// tile <= 0) are tiled and merged with map_back.
std::vector<Detection> detect_scene(const Model& model, const Image& scene, int tile, int overlap);

}  // namespace afran
