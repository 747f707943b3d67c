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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "afran/pipeline.hpp"

namespace afran {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

RunConfig smoke_config() {
  RunConfig rc;
  rc.model.input_size = 128;
  rc.model.width_multiplier = 0.0625;
  rc.model.affm.channels = 8;
  rc.model.dlcm.channels = 8;
  rc.model.anchors.scales = {16, 32, 64};
  rc.train.epochs = 2;
  rc.train.lr_decay_epochs = {};
  rc.train.warmup_epochs = 0;
  rc.train.seed = 5;
  return rc;
}

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "afran_pipeline_test";
    fs::remove_all(root_);
    SceneSpec spec;
    spec.size = 128;
    spec.min_span = 16;
    spec.max_span = 40;
    synthesize_dataset(root_ / "data", spec, 0, 3, 16, 2, 4);
  }
  static fs::path root_;
};
fs::path Pipeline::root_;

TEST_F(Pipeline, SmokeRunLowersLoss) {
  const Dataset data = Dataset::open(root_ / "data");
  TrainOptions opt;
  opt.out_dir = root_ / "smoke";
  const TrainSummary s = train_model(smoke_config(), data, opt);
  EXPECT_EQ(s.epochs_completed, 2);
  EXPECT_EQ(s.steps, 8);
  EXPECT_LT(s.last_epoch_loss, s.first_epoch_loss);
  for (const char* f : {"train_log.csv", "epochs.csv", "loss_curve.svg", "last.ckpt", "best.ckpt"})
    EXPECT_TRUE(fs::exists(opt.out_dir / f)) << f;
}

TEST_F(Pipeline, ResumeMatchesUninterruptedRun) {
  const Dataset data = Dataset::open(root_ / "data");
  RunConfig rc = smoke_config();
  rc.train.epochs = 3;
  TrainOptions whole;
  whole.out_dir = root_ / "whole";
  train_model(rc, data, whole);

  TrainOptions part;
  part.out_dir = root_ / "part";
  part.stop_after_epochs = 1;
  train_model(rc, data, part);
  part.stop_after_epochs = -1;
  part.resume = part.out_dir / "last.ckpt";
  const TrainSummary rest = train_model(rc, data, part);
  EXPECT_EQ(rest.epochs_completed, 2);
  EXPECT_EQ(slurp(whole.out_dir / "train_log.csv"), slurp(part.out_dir / "train_log.csv"));
  EXPECT_EQ(slurp(whole.out_dir / "last.ckpt"), slurp(part.out_dir / "last.ckpt"));
}

TEST_F(Pipeline, ResumeWithAdamMatches) {
  const Dataset data = Dataset::open(root_ / "data");
  RunConfig rc = smoke_config();
  rc.train.optimizer = "adam";
  rc.train.lr = 1e-4;
  TrainOptions whole;
  whole.out_dir = root_ / "adam_whole";
  train_model(rc, data, whole);
  TrainOptions part;
  part.out_dir = root_ / "adam_part";
  part.stop_after_epochs = 1;
  train_model(rc, data, part);
  part.stop_after_epochs = -1;
  part.resume = part.out_dir / "last.ckpt";
  train_model(rc, data, part);
  EXPECT_EQ(slurp(whole.out_dir / "train_log.csv"), slurp(part.out_dir / "train_log.csv"));
}

TEST_F(Pipeline, RetrainingReproducesLogs) {
  const Dataset data = Dataset::open(root_ / "data");
  TrainOptions a, b;
  a.out_dir = root_ / "rep_a";
  b.out_dir = root_ / "rep_b";
  b.threads = 2;  // prefetch must not change the trajectory
  train_model(smoke_config(), data, a);
  train_model(smoke_config(), data, b);
  EXPECT_EQ(slurp(a.out_dir / "train_log.csv"), slurp(b.out_dir / "train_log.csv"));
}

TEST_F(Pipeline, EvaluationIsDeterministic) {
  const Dataset data = Dataset::open(root_ / "data");
  const Model model(smoke_config().model, 1);
  const SplitEvaluation a = evaluate_split(model, data, "test");
  const SplitEvaluation b = evaluate_split(model, data, "test", 3);
  EXPECT_EQ(report_to_json(a.report), report_to_json(b.report));
  EXPECT_EQ(detections_to_jsonl(a.image_ids, a.detections), detections_to_jsonl(b.image_ids, b.detections));
  EXPECT_EQ(a.image_ids.size(), 4u);
}

TEST_F(Pipeline, EmptySplitReportsAbsentAp) {
  const fs::path dir = root_ / "novals";
  synthesize_dataset(dir, SceneSpec{.size = 128, .min_span = 16, .max_span = 40}, 0, 1, 2, 0, 1);
  const Dataset data = Dataset::open(dir);
  const Model model(smoke_config().model, 1);
  const SplitEvaluation e = evaluate_split(model, data, "val");
  EXPECT_FALSE(e.report.ap50.has_value());
  EXPECT_FALSE(e.report.ap.has_value());
}

TEST_F(Pipeline, ResumeRejectsOtherModel) {
  const Dataset data = Dataset::open(root_ / "data");
  RunConfig rc = smoke_config();
  const fs::path ckpt = root_ / "other.ckpt";
  save_checkpoint(ckpt, make_checkpoint(Model(rc.model, 1), "{}"));
  rc.model.affm.channels = 16;
  TrainOptions opt;
  opt.out_dir = root_ / "reject";
  opt.resume = ckpt;
  EXPECT_THROW(train_model(rc, data, opt), CheckpointError);
}

TEST_F(Pipeline, DetectSceneSkipsTilingForSmallInputs) {
  const Model model(smoke_config().model, 1);
  const Image img = read_png(root_ / "data" / Dataset::open(root_ / "data").annotations[0].image);
  const auto whole = detect_scene(model, img, 0, 0);
  const auto direct = run_detector(model, {img})[0];
  ASSERT_EQ(whole.size(), direct.size());
  for (std::size_t i = 0; i < whole.size(); ++i) EXPECT_EQ(whole[i].box, direct[i].box);
}

}  // namespace
}  // namespace afran
