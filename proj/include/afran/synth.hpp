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

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "afran/anchors.hpp"

namespace afran {

/// 8-bit grayscale raster, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const Image&) const = default;
};

struct Annotation {
  std::string image;  // path relative to the dataset root
  std::vector<Box> boxes;
  std::vector<int> labels;  // 1 = aircraft
  bool operator==(const Annotation&) const = default;
};

struct SceneSpec {
  int size = 640;
  int min_aircraft = 1;
  int max_aircraft = 6;
  int min_scatterers = 5;
  int max_scatterers = 15;
  double min_span = 16;  // wing span in px
  double max_span = 96;
  int clutter_blobs = 8;
  int looks = 4;
  std::uint64_t seed = 0;
};

struct Scene {
  Image image;
  Annotation annotation;
};

Scene generate_scene(const SceneSpec& spec);

struct AugmentConfig {
  double p_contrast = 0.5;
  double p_illumination = 0.5;
  double p_mirror = 0.5;  // horizontal
  double p_flip = 0.5;    // vertical
  double p_expand = 0.3;
  double p_crop = 0.5;
  double max_expand = 2.0;
  double min_crop = 0.5;  // crop side as a fraction of the image side
  double min_visible = 0.25;
};

// Individual transforms, exposed for testing.
void mirror_horizontal(Image& img, Annotation& ann);
void flip_vertical(Image& img, Annotation& ann);
void expand(Image& img, Annotation& ann, double factor, int offset_x, int offset_y,
            std::uint8_t fill);
/// Crops to [x0, x0+w) x [y0, y0+h); boxes keeping less than `min_visible`
/// of their area are dropped, the rest are clipped.
void crop(Image& img, Annotation& ann, int x0, int y0, int w, int h, double min_visible);

void augment(Image& img, Annotation& ann, std::mt19937_64& rng, const AugmentConfig& cfg = {});

/// Nearest-pixel resize of image and boxes to size x size.
void resize_square(Image& img, Annotation& ann, int size);

// ---- Tiling ----------------------------------------------------------------

struct TilePlacement {
  int x0 = 0, y0 = 0;
};

struct Tiles {
  std::vector<Image> tiles;
  std::vector<TilePlacement> placements;
};

/// Row-major tiles of side `tile` with step tile - overlap; ragged edges are
/// zero padded.
Tiles tile_large_scene(const Image& scene, int tile = 640, int overlap = 0);

std::vector<Detection> map_back(const std::vector<std::vector<Detection>>& per_tile,
                                const std::vector<TilePlacement>& placements,
                                const NmsConfig& nms_cfg);

// ---- Dataset I/O -----------------------------------------------------------

void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

std::string annotation_to_json(const Annotation& ann);
/// Throws std::runtime_error naming `line_no` on malformed input.
Annotation annotation_from_json(const std::string& line, int line_no);

void write_annotations(const std::filesystem::path& path, const std::vector<Annotation>& anns);
std::vector<Annotation> read_annotations(const std::filesystem::path& path);

struct Split {
  std::vector<std::string> train, val, test;
};

/// Seeded shuffle then 5:2:3 partition.
Split make_split(const std::vector<std::string>& ids, std::uint64_t seed);
/// Seeded shuffle then explicit partition sizes (must sum to ids.size()).
Split make_split(const std::vector<std::string>& ids, std::uint64_t seed, std::size_t train,
                 std::size_t val, std::size_t test);
void write_split(const std::filesystem::path& path, const Split& split);
Split read_split(const std::filesystem::path& path);

/// Mixes a base seed with a stream index (splitmix64).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Writes images/scene_NNNNN.png, annotations.jsonl and split.json. Scene i
/// uses derive_seed(seed, i). Zero counts select the 5:2:3 ratio over `total`.
void synthesize_dataset(const std::filesystem::path& root, const SceneSpec& spec, int total,
                        std::uint64_t seed, int train = 0, int val = 0, int test = 0);

struct Dataset {
  std::filesystem::path root;
  std::vector<Annotation> annotations;
  Split split;

  /// Missing root or empty directory yields an empty dataset.
  static Dataset open(const std::filesystem::path& root);
  std::vector<const Annotation*> subset(const std::string& which) const;
};

}  // namespace afran
