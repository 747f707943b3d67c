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
#include <random>
#include <tuple>

#include "afran/metrics.hpp"
#include "afran/network.hpp"
#include "oracles.hpp"

namespace afran {
namespace {

using Dets = std::vector<std::vector<Detection>>;
using Gts = std::vector<std::vector<Box>>;

TEST(Evaluate, PerfectSingleDetection) {
  const Gts gts{{{10, 10, 50, 50}}};
  const Dets dets{{{{11, 11, 50, 50}, 0.9}}};
  const EvalReport r = evaluate(dets, gts);
  ASSERT_TRUE(r.ap50);
  EXPECT_EQ(*r.ap50, 1.0);
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.f1, 1.0);
}

TEST(Evaluate, OneTruePositiveOneFalsePositive) {
  const Gts gts{{{10, 10, 50, 50}}};
  const Dets dets{{{{10, 10, 50, 50}, 0.9}, {{100, 100, 140, 140}, 0.8}}};
  const EvalReport r = evaluate(dets, gts);
  EXPECT_EQ(*r.ap50, 1.0);
  EXPECT_EQ(r.precision, 0.5);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.f1, 2.0 / 3.0);
}

TEST(Evaluate, FalsePositiveFirstHalvesThePrecisionEnvelope) {
  const Gts gts{{{10, 10, 50, 50}}};
  const Dets dets{{{{10, 10, 50, 50}, 0.8}, {{100, 100, 140, 140}, 0.9}}};
  // precision 0.5 at every recall threshold
  EXPECT_EQ(*evaluate(dets, gts).ap50, 0.5);
}

TEST(Evaluate, EmptySplitHasNoAp) {
  const EvalReport r = evaluate({}, {});
  EXPECT_FALSE(r.ap);
  EXPECT_FALSE(r.ap50);
  EXPECT_EQ(r.precision, 0.0);
  const EvalReport g = evaluate({{}}, {{}});
  EXPECT_FALSE(g.ap50);
}

TEST(Evaluate, NoDetectionsMeansZeroApAndPrecision) {
  const EvalReport r = evaluate({{}}, {{{0, 0, 10, 10}}});
  EXPECT_EQ(*r.ap50, 0.0);
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.recall, 0.0);
}

TEST(Evaluate, AreaBucketsAreInclusive) {
  const Gts gts{{{0, 0, 32, 32}}};
  const Dets dets{{{{0, 0, 32, 32}, 0.9}}};
  const EvalReport r = evaluate(dets, gts);
  EXPECT_EQ(*r.ap_small, 1.0);
  EXPECT_EQ(*r.ap_medium, 1.0);
  EXPECT_FALSE(r.ap_large);
}

TEST(Evaluate, DetectionsBelowConfidenceFloorAreDropped) {
  const Gts gts{{{10, 10, 50, 50}}};
  const Dets dets{{{{10, 10, 50, 50}, 0.01}}};
  const EvalReport r = evaluate(dets, gts);
  EXPECT_EQ(*r.ap50, 0.0);
  EXPECT_EQ(r.num_detections, 0);
}

TEST(Evaluate, EqualsReferenceEvaluatorOnRandomFixtures) {
  std::mt19937_64 rng(99);
  const AreaRange ranges[] = {kAreaAll, kAreaSmall, kAreaMedium, kAreaLarge};
  for (int f = 0; f < 50; ++f) {
    auto [dets, gts] = oracle::random_fixture(rng, 20);
    Dets kept(dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i)
      for (const Detection& d : dets[i])
        if (d.score >= 0.05) kept[i].push_back(d);
    for (const AreaRange& a : ranges)
      for (int t = 0; t < 10; ++t) {
        const double thr = 0.5 + 0.05 * t;
        bool defined = false;
        const double ref = oracle::reference_ap(dets, gts, thr, a, &defined);
        const auto got = average_precision(kept, gts, thr, a);
        ASSERT_EQ(got.has_value(), defined);
        if (defined) EXPECT_EQ(*got, ref) << "fixture " << f << " thr " << thr;
      }
  }
}

TEST(Curves, PerfectDetectorPinnedAtOne) {
  const Gts gts{{{0, 0, 40, 40}, {100, 100, 150, 150}}};
  const Dets dets{{{{0, 0, 40, 40}, 0.9}, {{100, 100, 150, 150}, 0.7}}};
  const EvalReport r = evaluate(dets, gts);
  ASSERT_EQ(r.curves.size(), 2u);
  ASSERT_EQ(r.curves[0].recall.size(), 101u);
  for (double p : r.curves[0].precision) EXPECT_EQ(p, 1.0);
  EXPECT_EQ(r.curves[0].recall.back(), 1.0);
}

TEST(Curves, EmptyDetectionsWriteHeaderOnly) {
  const auto dir = std::filesystem::temp_directory_path() / "afran_curves_test";
  std::filesystem::remove_all(dir);
  emit_curves(evaluate({{}}, {{{0, 0, 10, 10}}}), dir);
  std::ifstream f(dir / "pr_iou50.csv");
  std::string all((std::istreambuf_iterator<char>(f)), {});
  EXPECT_EQ(all, "recall,precision\n");
  EXPECT_TRUE(std::filesystem::exists(dir / "pr_iou75.svg"));
  std::filesystem::remove_all(dir);
}

TEST(Report, JsonIsStableAndMarksAbsentAp) {
  const std::string a = report_to_json(evaluate({}, {}));
  EXPECT_NE(a.find("\"AP50\": null"), std::string::npos);
  const Gts gts{{{0, 0, 40, 40}}};
  const Dets dets{{{{0, 0, 40, 40}, 0.9}}};
  EXPECT_EQ(report_to_json(evaluate(dets, gts)), report_to_json(evaluate(dets, gts)));
}

// ---- Complexity -----------------------------------------------------------

TEST(Complexity, SingleLayerFormulas) {
  LayerDesc conv{"c", LayerKind::Conv, {2, 4, 3, 3, 1, 1, 1, true}, 8, 8, 64};
  EXPECT_EQ(layer_params(conv), 76);
  EXPECT_EQ(layer_macs(conv), 4608);
  LayerDesc pw{"p", LayerKind::Conv, {8, 8, 1, 1, 1, 0, 1, false}, 1, 1, 1};
  EXPECT_EQ(layer_params(pw), 64);
  const Complexity c = complexity_of({conv});
  EXPECT_EQ(c.params_total, 76);
  EXPECT_EQ(c.mac_total, 4608);
}

TEST(Complexity, StoreRegistersPositions) {
  ParameterStore store(0, true);
  store.conv("c", {2, 4, 3, 3, 1, 1, 1, true}, LayerKind::Conv, 8, 8);
  ASSERT_EQ(store.layers().size(), 1u);
  EXPECT_EQ(store.layers()[0].positions, 64);
  EXPECT_EQ(complexity_of(store.layers()).mac_total, 4608);
}

TEST(Complexity, DeskTotalsAreSumsOfLayers) {
  NetConfig cfg;
  cfg.input_size = 320;
  cfg.width_multiplier = 0.125;
  cfg.affm.channels = 32;
  cfg.dlcm.channels = 32;
  const Complexity c = mac_count(cfg, 320);
  std::int64_t p = 0, m = 0;
  for (const LayerCost& l : c.layers) p += l.params, m += l.macs;
  EXPECT_EQ(p, c.params_total);
  EXPECT_EQ(m, c.mac_total);
  Model model(cfg, 0);
  EXPECT_EQ(static_cast<std::int64_t>(model.store().parameter_count()), c.params_total);
}

TEST(Complexity, FullWidthWithinTenPercentOfReference) {
  const NetConfig cfg;  // 640 input, full width
  const Complexity p = params_count(cfg);
  const Complexity m = mac_count(cfg, 640);
  EXPECT_NEAR(p.params_total / 35.82e6, 1.0, 0.10);
  EXPECT_NEAR(m.mac_total / 150.59e9, 1.0, 0.10);
}

}  // namespace
}  // namespace afran
