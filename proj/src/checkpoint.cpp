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

#include "afran/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "json.hpp"

namespace afran {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'A', 'F', 'R', 'A', 'N', 'C', 'K', 'P'};

using json = nlohmann::ordered_json;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(std::istream& in, const std::string& where) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw CheckpointError("truncated checkpoint " + where);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    const Shape s = t.shape();
    tensors.push_back({{"name", name}, {"shape", {s.n, s.c, s.h, s.w}}, {"offset", offset}, {"count", t.numel()}});
    offset += t.numel();
  }
  json manifest = {{"format_version", kCheckpointVersion},
                   {"config", json::parse(ckpt.config_json.empty() ? "{}" : ckpt.config_json)},
                   {"state", json::parse(ckpt.state_json.empty() ? "{}" : ckpt.state_json)},
                   {"tensors", tensors}};
  const std::string text = manifest.dump();

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : ckpt.tensors)
      out.write(reinterpret_cast<const char*>(t.data().data()),
                static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw CheckpointError(path.string() + " is not a checkpoint archive");
  const auto version = take<std::uint32_t>(in, path.string());
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto len = take<std::uint64_t>(in, path.string());
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw CheckpointError("truncated manifest");
  json manifest;
  try {
    manifest = json::parse(text);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("corrupt manifest: ") + e.what());
  }
  Checkpoint ckpt;
  ckpt.config_json = manifest.at("config").dump();
  ckpt.state_json = manifest.at("state").dump();
  std::vector<double> payload;
  for (const auto& t : manifest.at("tensors")) {
    const auto shape = t.at("shape").get<std::vector<int>>();
    if (shape.size() != 4) throw CheckpointError("tensor shape must have rank 4");
    const auto count = t.at("count").get<std::uint64_t>();
    Tensor v(Shape{shape[0], shape[1], shape[2], shape[3]});
    if (v.numel() != count) throw CheckpointError("count/shape mismatch for " + t.at("name").get<std::string>());
    if (!in.read(reinterpret_cast<char*>(v.mutable_data().data()),
                 static_cast<std::streamsize>(count * sizeof(double))))
      throw CheckpointError("truncated payload at " + t.at("name").get<std::string>());
    ckpt.tensors.emplace_back(t.at("name").get<std::string>(), v);
  }
  return ckpt;
}

void load_parameters(ParameterStore& store, const Checkpoint& ckpt) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : ckpt.tensors) by_name[name] = &t;
  for (const auto& [name, param] : store.parameters()) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError("checkpoint lacks parameter " + name);
    if (!(it->second->shape() == param.shape()))
      throw CheckpointError("shape mismatch for parameter " + name + ": checkpoint " +
                            it->second->shape().str() + ", model " + param.shape().str());
  }
  for (const auto& [name, param] : store.parameters()) {
    Tensor dst = param;
    const auto src = by_name[name]->data();
    std::copy(src.begin(), src.end(), dst.mutable_data().begin());
  }
}

}  // namespace afran
