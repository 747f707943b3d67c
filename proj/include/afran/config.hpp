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

#include <array>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "afran/adm.hpp"
#include "afran/anchors.hpp"
#include "afran/deform.hpp"
#include "afran/synth.hpp"

namespace afran {

inline constexpr int kConfigSchemaVersion = 1;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AffmConfig {
  int channels = 256;
  std::array<bool, 3> sa_levels{true, true, true};  // P2, P3, P4
  bool forward_bm = true;  // Conv4_3 into P3
  bool forward_mt = true;  // Conv5_3 into P4
};

struct MatchConfig {
  double pos_iou = 0.5;
  double theta_neg = 0.99;
  double ohem_ratio = 3.0;
  double alpha = 1.0;
};

struct NetConfig {
  int input_size = 640;
  double width_multiplier = 1.0;
  AffmConfig affm;
  DlcmConfig dlcm;
  HeadConfig head;
  AnchorConfig anchors;
  MatchConfig match;
  NmsConfig nms;
  double detect_conf = 0.05;  // minimum score emitted by inference

  /// VGG widths scaled by width_multiplier (at least 1 channel).
  int width(int full) const;
  /// Group count r of each level given the feature-forward switches.
  std::array<int, 3> groups() const;
  void validate() const;
};

struct TrainConfig {
  int epochs = 200;
  int batch = 4;
  double lr = 1e-3;
  std::vector<int> lr_decay_epochs{75, 150};
  double gamma = 0.1;
  int warmup_epochs = 5;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  bool augment = true;
  int log_every = 1;
  double grad_clip = 0.0;  // global-norm clip, 0 disables
  /// "sgd" or "adam"; adam reads momentum as beta1.
  std::string optimizer = "sgd";
  double beta2 = 0.999;

  void validate() const;
};

struct DataConfig {
  SceneSpec scene;
  int num_scenes = 100;
  /// Explicit per-split counts; when all zero the 5:2:3 ratio applies.
  int train_count = 0, val_count = 0, test_count = 0;
  AugmentConfig augment;
};

struct RunConfig {
  NetConfig model;
  TrainConfig train;
  DataConfig data;
};

/// Strict parse: unknown keys, wrong types and bad values throw ConfigError.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const RunConfig& cfg);

NetConfig parse_net_config(const std::string& json_text);
std::string net_config_to_json(const NetConfig& cfg);

}  // namespace afran
