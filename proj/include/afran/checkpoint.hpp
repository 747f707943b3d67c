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

// Archive layout (all integers little-endian):
//   "AFRANCKP"            8 bytes
//   format version        u32
//   manifest length       u64
//   manifest              UTF-8 JSON {format_version, config, state, tensors:
//                         [{name, shape:[n,c,h,w], offset, count}]}
//   payload               f64 values, tensors back to back; offset/count in
//                         elements

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "afran/layers.hpp"

namespace afran {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  std::string config_json;  // model section
  std::string state_json = "{}";
  std::vector<std::pair<std::string, Tensor>> tensors;
};

/// Writes atomically via a temporary file and rename.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies every store parameter from the archive. Missing names or shape
/// differences throw CheckpointError naming the first offending parameter.
void load_parameters(ParameterStore& store, const Checkpoint& ckpt);

}  // namespace afran
