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

#include "afran/config.hpp"
#include "afran/pipeline.hpp"

namespace afran {
namespace {

TEST(Config, DefaultsRoundTrip) {
  const RunConfig d;
  const std::string text = config_to_json(d);
  EXPECT_EQ(config_to_json(parse_config(text)), text);
  EXPECT_EQ(config_to_json(parse_config("{}")), text);
  EXPECT_EQ(net_config_to_json(parse_net_config(net_config_to_json(d.model))), net_config_to_json(d.model));
}

TEST(Config, OverridesApply) {
  const RunConfig c = parse_config(R"({"model": {"width_multiplier": 0.125, "affm": {"channels": 32}},
                                       "train": {"epochs": 30, "lr_decay_epochs": [20], "seed": 9}})");
  EXPECT_EQ(c.model.width_multiplier, 0.125);
  EXPECT_EQ(c.model.affm.channels, 32);
  EXPECT_EQ(c.train.epochs, 30);
  EXPECT_EQ(c.train.lr_decay_epochs, std::vector<int>{20});
  EXPECT_EQ(c.train.seed, 9u);
  EXPECT_EQ(c.train.batch, 4);
  EXPECT_EQ(c.model.width(512), 64);
}

TEST(Config, StrictParsing) {
  EXPECT_THROW(parse_config("not json"), ConfigError);
  EXPECT_THROW(parse_config(R"({"modle": {}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"train": {"epochs": "many"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"train": {"lr": 0.001, "lrr": 1}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"schema_version": 7})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"model": {"affm": {"channels": -3}}})"), ConfigError);
}

TEST(Config, DecayEpochsMustIncreaseBelowEpochs) {
  EXPECT_THROW(parse_config(R"({"train": {"lr_decay_epochs": [150, 75]}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"train": {"lr_decay_epochs": [75, 75]}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"train": {"epochs": 100, "lr_decay_epochs": [75, 150]}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"train": {"optimizer": "rmsprop"}})"), ConfigError);
  EXPECT_NO_THROW(parse_config(R"({"train": {"epochs": 151}})"));
}

TEST(Schedule, DefaultValues) {
  const TrainConfig t;
  const long spe = 20;
  EXPECT_NEAR(learning_rate(t, 0, 0, spe), 1e-6, 1e-18);
  // halfway through warmup
  const long half = 5 * spe / 2;
  EXPECT_NEAR(learning_rate(t, static_cast<int>(half / spe), half % spe, spe), 1e-6 + (1e-3 - 1e-6) * 0.5, 1e-15);
  EXPECT_NEAR(learning_rate(t, 5, 0, spe), 1e-3, 1e-18);
  EXPECT_NEAR(learning_rate(t, 74, spe - 1, spe), 1e-3, 1e-18);
  EXPECT_NEAR(learning_rate(t, 75, 0, spe), 1e-4, 1e-18);
  EXPECT_NEAR(learning_rate(t, 80, 3, spe), 1e-4, 1e-18);
  EXPECT_NEAR(learning_rate(t, 150, 0, spe), 1e-5, 1e-18);
  EXPECT_NEAR(learning_rate(t, 199, spe - 1, spe), 1e-5, 1e-18);
}

TEST(Schedule, WarmupIsMonotone) {
  const TrainConfig t;
  double prev = 0;
  for (int e = 0; e < 5; ++e)
    for (long s = 0; s < 7; ++s) {
      const double lr = learning_rate(t, e, s, 7);
      EXPECT_GT(lr, prev);
      EXPECT_LT(lr, 1e-3);
      prev = lr;
    }
}

}  // namespace
}  // namespace afran
