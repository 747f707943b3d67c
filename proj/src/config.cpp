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

#include "afran/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace afran {
namespace {

using json = nlohmann::ordered_json;

// Reads keys out of one JSON object, remembering which were consumed so
// leftovers can be reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  Section sub(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    auto it = j_.find(key);
    return Section(it == j_.end() ? empty : *it, path_ + "." + key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(path_ + ": unknown key '" + it.key() + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_net(Section s, NetConfig& c) {
  s.get("input_size", c.input_size);
  s.get("width_multiplier", c.width_multiplier);
  s.get("detect_conf", c.detect_conf);
  {
    Section a = s.sub("affm");
    a.get("channels", c.affm.channels);
    a.get("sa_levels", c.affm.sa_levels);
    Section ff = a.sub("feature_forward");
    ff.get("bm", c.affm.forward_bm);
    ff.get("mt", c.affm.forward_mt);
    ff.finish();
    if (a.has("groups")) {
      std::array<int, 3> groups{};
      a.get("groups", groups);
      if (groups != c.groups())
        throw ConfigError("model.affm.groups must equal the source counts per level (" +
                          std::to_string(c.groups()[0]) + "," + std::to_string(c.groups()[1]) +
                          "," + std::to_string(c.groups()[2]) + ")");
    }
    a.finish();
  }
  {
    Section d = s.sub("dlcm");
    c.dlcm.channels = c.affm.channels;
    d.get("stack_depth", c.dlcm.stack_depth);
    d.get("dilation", c.dlcm.dilation);
    d.get("channels", c.dlcm.channels);
    d.finish();
  }
  {
    Section h = s.sub("head");
    h.get("k", c.head.k);
    h.get("num_classes", c.head.num_classes);
    h.finish();
  }
  {
    Section a = s.sub("anchors");
    a.get("scales", c.anchors.scales);
    a.get("ratios", c.anchors.ratios);
    a.finish();
    c.head.anchors_per_cell = c.anchors.anchors_per_cell();
  }
  {
    Section m = s.sub("matching");
    m.get("pos_iou", c.match.pos_iou);
    m.get("theta_neg", c.match.theta_neg);
    m.get("ohem_ratio", c.match.ohem_ratio);
    m.get("alpha", c.match.alpha);
    m.finish();
  }
  {
    Section n = s.sub("nms");
    n.get("iou", c.nms.iou_thresh);
    n.get("pre_top_k", c.nms.pre_top_k);
    n.get("keep", c.nms.keep);
    n.finish();
  }
  s.finish();
  c.validate();
}

json write_net(const NetConfig& c) {
  return {{"input_size", c.input_size},
          {"width_multiplier", c.width_multiplier},
          {"detect_conf", c.detect_conf},
          {"affm",
           {{"channels", c.affm.channels},
            {"sa_levels", c.affm.sa_levels},
            {"groups", c.groups()},
            {"feature_forward", {{"bm", c.affm.forward_bm}, {"mt", c.affm.forward_mt}}}}},
          {"dlcm",
           {{"stack_depth", c.dlcm.stack_depth},
            {"dilation", c.dlcm.dilation},
            {"channels", c.dlcm.channels}}},
          {"head", {{"k", c.head.k}, {"num_classes", c.head.num_classes}}},
          {"anchors", {{"scales", c.anchors.scales}, {"ratios", c.anchors.ratios}}},
          {"matching",
           {{"pos_iou", c.match.pos_iou},
            {"theta_neg", c.match.theta_neg},
            {"ohem_ratio", c.match.ohem_ratio},
            {"alpha", c.match.alpha}}},
          {"nms",
           {{"iou", c.nms.iou_thresh}, {"pre_top_k", c.nms.pre_top_k}, {"keep", c.nms.keep}}}};
}

void read_train(Section s, TrainConfig& t) {
  s.get("epochs", t.epochs);
  s.get("batch", t.batch);
  s.get("lr", t.lr);
  s.get("lr_decay_epochs", t.lr_decay_epochs);
  s.get("gamma", t.gamma);
  s.get("warmup_epochs", t.warmup_epochs);
  s.get("momentum", t.momentum);
  s.get("weight_decay", t.weight_decay);
  s.get("seed", t.seed);
  s.get("augment", t.augment);
  s.get("log_every", t.log_every);
  s.get("grad_clip", t.grad_clip);
  s.get("optimizer", t.optimizer);
  s.get("beta2", t.beta2);
  s.finish();
  t.validate();
}

json write_train(const TrainConfig& t) {
  return {{"epochs", t.epochs},         {"batch", t.batch},
          {"lr", t.lr},                 {"lr_decay_epochs", t.lr_decay_epochs},
          {"gamma", t.gamma},           {"warmup_epochs", t.warmup_epochs},
          {"momentum", t.momentum},     {"weight_decay", t.weight_decay},
          {"seed", t.seed},             {"augment", t.augment},
          {"log_every", t.log_every},   {"grad_clip", t.grad_clip},
          {"optimizer", t.optimizer},   {"beta2", t.beta2}};
}

void read_data(Section s, DataConfig& d) {
  s.get("num_scenes", d.num_scenes);
  s.get("train_count", d.train_count);
  s.get("val_count", d.val_count);
  s.get("test_count", d.test_count);
  {
    Section sc = s.sub("scene");
    SceneSpec& p = d.scene;
    sc.get("size", p.size);
    sc.get("min_aircraft", p.min_aircraft);
    sc.get("max_aircraft", p.max_aircraft);
    sc.get("min_scatterers", p.min_scatterers);
    sc.get("max_scatterers", p.max_scatterers);
    sc.get("min_span", p.min_span);
    sc.get("max_span", p.max_span);
    sc.get("clutter_blobs", p.clutter_blobs);
    sc.get("looks", p.looks);
    sc.finish();
  }
  {
    Section a = s.sub("augment");
    AugmentConfig& g = d.augment;
    a.get("p_contrast", g.p_contrast);
    a.get("p_illumination", g.p_illumination);
    a.get("p_mirror", g.p_mirror);
    a.get("p_flip", g.p_flip);
    a.get("p_expand", g.p_expand);
    a.get("p_crop", g.p_crop);
    a.get("max_expand", g.max_expand);
    a.get("min_crop", g.min_crop);
    a.get("min_visible", g.min_visible);
    a.finish();
  }
  s.finish();
  const SceneSpec& p = d.scene;
  if (p.size < 32) throw ConfigError("data.scene.size must be >= 32");
  if (p.min_aircraft < 0 || p.max_aircraft < p.min_aircraft)
    throw ConfigError("data.scene aircraft range invalid");
  if (p.min_scatterers < 1 || p.max_scatterers < p.min_scatterers)
    throw ConfigError("data.scene scatterer range invalid");
  if (!(p.min_span > 0) || p.max_span < p.min_span) throw ConfigError("data.scene span range invalid");
  if (p.looks < 1) throw ConfigError("data.scene.looks must be >= 1");
  if (d.num_scenes < 0 || d.train_count < 0 || d.val_count < 0 || d.test_count < 0)
    throw ConfigError("data counts must be non-negative");
}

json write_data(const DataConfig& d) {
  const SceneSpec& p = d.scene;
  const AugmentConfig& g = d.augment;
  return {{"num_scenes", d.num_scenes},
          {"train_count", d.train_count},
          {"val_count", d.val_count},
          {"test_count", d.test_count},
          {"scene",
           {{"size", p.size},
            {"min_aircraft", p.min_aircraft},
            {"max_aircraft", p.max_aircraft},
            {"min_scatterers", p.min_scatterers},
            {"max_scatterers", p.max_scatterers},
            {"min_span", p.min_span},
            {"max_span", p.max_span},
            {"clutter_blobs", p.clutter_blobs},
            {"looks", p.looks}}},
          {"augment",
           {{"p_contrast", g.p_contrast},
            {"p_illumination", g.p_illumination},
            {"p_mirror", g.p_mirror},
            {"p_flip", g.p_flip},
            {"p_expand", g.p_expand},
            {"p_crop", g.p_crop},
            {"max_expand", g.max_expand},
            {"min_crop", g.min_crop},
            {"min_visible", g.min_visible}}}};
}

json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

void check_version(Section& s) {
  int version = kConfigSchemaVersion;
  s.get("schema_version", version);
  if (version != kConfigSchemaVersion)
    throw ConfigError("unsupported schema_version " + std::to_string(version));
}

}  // namespace

int NetConfig::width(int full) const {
  return std::max(1, static_cast<int>(std::lround(full * width_multiplier)));
}

std::array<int, 3> NetConfig::groups() const {
  return {2, 2 + (affm.forward_bm ? 1 : 0), 1 + (affm.forward_mt ? 1 : 0)};
}

void NetConfig::validate() const {
  if (input_size <= 0 || input_size % 32 != 0)
    throw ConfigError("model.input_size must be a positive multiple of 32");
  if (!(width_multiplier > 0)) throw ConfigError("model.width_multiplier must be positive");
  if (affm.channels < 1) throw ConfigError("model.affm.channels must be positive");
  if (dlcm.channels < 1) throw ConfigError("model.dlcm.channels must be positive");
  if (dlcm.stack_depth < 1) throw ConfigError("model.dlcm.stack_depth must be positive");
  for (int d : dlcm.dilation)
    if (d < 1) throw ConfigError("model.dlcm.dilation entries must be positive");
  if (head.k < 1 || head.k % 2 == 0) throw ConfigError("model.head.k must be odd");
  if (head.num_classes < 2) throw ConfigError("model.head.num_classes must be >= 2");
  if (anchors.ratios.empty()) throw ConfigError("model.anchors.ratios must not be empty");
  for (double r : anchors.ratios)
    if (!(r > 0)) throw ConfigError("model.anchors.ratios must be positive");
  for (double s : anchors.scales)
    if (!(s > 0)) throw ConfigError("model.anchors.scales must be positive");
  if (!(match.pos_iou > 0 && match.pos_iou <= 1)) throw ConfigError("model.matching.pos_iou out of range");
  if (!(match.theta_neg > 0 && match.theta_neg <= 1))
    throw ConfigError("model.matching.theta_neg out of range");
  if (match.ohem_ratio < 0 || match.alpha < 0) throw ConfigError("model.matching weights must be >= 0");
  if (!(nms.iou_thresh > 0 && nms.iou_thresh <= 1)) throw ConfigError("model.nms.iou out of range");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be positive");
  if (batch < 1) throw ConfigError("train.batch must be positive");
  if (!(lr > 0)) throw ConfigError("train.lr must be positive");
  for (std::size_t i = 0; i < lr_decay_epochs.size(); ++i) {
    if (i > 0 && lr_decay_epochs[i] <= lr_decay_epochs[i - 1])
      throw ConfigError("train.lr_decay_epochs must be strictly increasing");
    if (lr_decay_epochs[i] >= epochs) throw ConfigError("train.lr_decay_epochs must be < epochs");
  }
  if (warmup_epochs < 0) throw ConfigError("train.warmup_epochs must be >= 0");
  if (momentum < 0 || momentum >= 1) throw ConfigError("train.momentum must be in [0,1)");
  if (weight_decay < 0) throw ConfigError("train.weight_decay must be >= 0");
  if (log_every < 1) throw ConfigError("train.log_every must be positive");
  if (optimizer != "sgd" && optimizer != "adam") throw ConfigError("train.optimizer must be \"sgd\" or \"adam\"");
  if (beta2 < 0 || beta2 >= 1) throw ConfigError("train.beta2 must be in [0,1)");
  if (grad_clip < 0) throw ConfigError("train.grad_clip must be >= 0");
}

RunConfig parse_config(const std::string& text) {
  const json j = parse_text(text);
  RunConfig cfg;
  Section root(j, "config");
  check_version(root);
  read_net(root.sub("model"), cfg.model);
  read_train(root.sub("train"), cfg.train);
  read_data(root.sub("data"), cfg.data);
  root.finish();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const RunConfig& cfg) {
  json j = {{"schema_version", kConfigSchemaVersion},
            {"model", write_net(cfg.model)},
            {"train", write_train(cfg.train)},
            {"data", write_data(cfg.data)}};
  return j.dump(2) + "\n";
}

NetConfig parse_net_config(const std::string& text) {
  const json j = parse_text(text);
  NetConfig cfg;
  read_net(Section(j, "model"), cfg);
  return cfg;
}

std::string net_config_to_json(const NetConfig& cfg) { return write_net(cfg).dump(); }

}  // namespace afran
