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

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "afran/checkpoint.hpp"
#include "afran/pipeline.hpp"
#include "oracles.hpp"

namespace afran {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "afran_ckpt_test";
  fs::create_directories(dir);
  return dir / name;
}

NetConfig tiny() {
  NetConfig c;
  c.input_size = 64;
  c.width_multiplier = 0.0625;
  c.affm.channels = 8;
  c.dlcm.channels = 8;
  return c;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  std::mt19937_64 rng(1);
  Checkpoint c;
  c.config_json = R"({"a":1})";
  c.state_json = R"({"epoch":3})";
  c.tensors.emplace_back("x", oracle::random_tensor(Shape{2, 3, 4, 5}, rng, -1e3, 1e3));
  c.tensors.emplace_back("y", Tensor(Shape{1, 1, 1, 1}, {-0.0}));
  c.tensors.emplace_back("z", Tensor(Shape{1, 1, 1, 3}, {1e-300, 3.14159, -7}));
  const fs::path p = scratch("rt.ckpt");
  save_checkpoint(p, c);
  const Checkpoint r = load_checkpoint(p);
  EXPECT_EQ(r.config_json, c.config_json);
  EXPECT_EQ(r.state_json, c.state_json);
  ASSERT_EQ(r.tensors.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(r.tensors[i].first, c.tensors[i].first);
    EXPECT_EQ(r.tensors[i].second.shape(), c.tensors[i].second.shape());
    const auto a = r.tensors[i].second.data(), b = c.tensors[i].second.data();
    ASSERT_EQ(a.size(), b.size());
    EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)), 0);
  }
  EXPECT_FALSE(fs::exists(p.string() + ".tmp"));
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  const fs::path p = scratch("bad.ckpt");
  std::ofstream(p, std::ios::binary) << "NOTACKPT and some bytes";
  EXPECT_THROW(load_checkpoint(p), CheckpointError);
  EXPECT_THROW(load_checkpoint(scratch("missing.ckpt")), CheckpointError);

  // truncated payload
  Checkpoint c;
  c.config_json = "{}";
  c.tensors.emplace_back("x", Tensor(Shape{1, 1, 10, 10}, 1.0));
  const fs::path q = scratch("trunc.ckpt");
  save_checkpoint(q, c);
  fs::resize_file(q, fs::file_size(q) - 16);
  EXPECT_THROW(load_checkpoint(q), CheckpointError);
}

TEST(Checkpoint, ModelWeightsReload) {
  Model a(tiny(), 3), b(tiny(), 4);
  const fs::path p = scratch("model.ckpt");
  save_checkpoint(p, make_checkpoint(a, "{}"));
  load_parameters(b.store(), load_checkpoint(p));
  const auto& pa = a.store().parameters();
  const auto& pb = b.store().parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const auto x = pa[i].second.data(), y = pb[i].second.data();
    ASSERT_TRUE(std::equal(x.begin(), x.end(), y.begin())) << pa[i].first;
  }
  const auto m = load_model(p);
  EXPECT_EQ(net_config_to_json(m->config()), net_config_to_json(tiny()));
}

TEST(Checkpoint, MismatchNamesFirstParameter) {
  Model a(tiny(), 3);
  NetConfig wide = tiny();
  wide.affm.channels = 16;
  Model b(wide, 3);
  const Checkpoint c = make_checkpoint(a, "{}");
  try {
    load_parameters(b.store(), c);
    FAIL() << "expected a mismatch";
  } catch (const CheckpointError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("shape mismatch for parameter pyramid."), std::string::npos) << msg;
  }

  Checkpoint missing = c;
  const std::string dropped = missing.tensors[2].first;
  missing.tensors.erase(missing.tensors.begin() + 2);
  try {
    load_parameters(a.store(), missing);
    FAIL() << "expected a missing parameter";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find(dropped), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace afran
