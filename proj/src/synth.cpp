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

#include "afran/synth.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace afran {
namespace {

using json = nlohmann::ordered_json;

struct Blob {
  double x, y, sigma, amplitude;
};

// Adds Gaussian blobs into a reflectivity map, truncated at 3 sigma.
void splat(std::vector<double>& refl, int size, const Blob& b) {
  const int r = static_cast<int>(std::ceil(3 * b.sigma));
  const int cx = static_cast<int>(std::lround(b.x)), cy = static_cast<int>(std::lround(b.y));
  const double inv = 1.0 / (2 * b.sigma * b.sigma);
  for (int y = std::max(0, cy - r); y <= std::min(size - 1, cy + r); ++y)
    for (int x = std::max(0, cx - r); x <= std::min(size - 1, cx + r); ++x) {
      const double d2 = (x - b.x) * (x - b.x) + (y - b.y) * (y - b.y);
      refl[static_cast<std::size_t>(y) * size + x] += b.amplitude * std::exp(-d2 * inv);
    }
}

bool overlaps(const Box& a, const std::vector<Box>& others, double margin) {
  for (const Box& o : others)
    if (a.x1 - margin < o.x2 && o.x1 - margin < a.x2 && a.y1 - margin < o.y2 && o.y1 - margin < a.y2)
      return true;
  return false;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}
int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

Box clip_box(const Box& b, double w, double h) {
  return {std::clamp(b.x1, 0.0, w), std::clamp(b.y1, 0.0, h), std::clamp(b.x2, 0.0, w),
          std::clamp(b.y2, 0.0, h)};
}

std::uint8_t mean_pixel(const Image& img) {
  if (img.pixels.empty()) return 0;
  double s = 0;
  for (auto p : img.pixels) s += p;
  return static_cast<std::uint8_t>(std::lround(s / img.pixels.size()));
}

}  // namespace

// ---- Scene generation -------------------------------------------------------

Scene generate_scene(const SceneSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  const int n = spec.size;
  std::vector<double> refl(static_cast<std::size_t>(n) * n);
  // Smoothly varying ground reflectivity.
  const double base = uniform(rng, 0.03, 0.06);
  const double gx = uniform(rng, -0.3, 0.3), gy = uniform(rng, -0.3, 0.3);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      refl[static_cast<std::size_t>(y) * n + x] =
          base * (1.0 + gx * (x / double(n) - 0.5) + gy * (y / double(n) - 0.5));

  Scene scene;
  std::vector<Box> taken;
  const int count = uniform_int(rng, spec.min_aircraft, spec.max_aircraft);
  for (int a = 0; a < count; ++a) {
    for (int attempt = 0; attempt < 50; ++attempt) {
      const double span = uniform(rng, spec.min_span, spec.max_span);
      const double length = span * uniform(rng, 0.85, 1.15);
      const double theta = uniform(rng, 0.0, 2 * std::numbers::pi);
      const double wing_at = uniform(rng, -0.1, 0.1);  // along fuselage, 0 = middle
      const double tail_span = span * uniform(rng, 0.3, 0.45);
      const double ux = std::cos(theta), uy = std::sin(theta);  // fuselage axis
      const double vx = -uy, vy = ux;                           // wing axis
      // Local (u, v) scatterer coordinates: nose, tail, two wing tips first
      // so the bounding box always spans the airframe.
      std::vector<std::array<double, 2>> local = {
          {0.5 * length, 0}, {-0.5 * length, 0}, {wing_at * length, 0.5 * span},
          {wing_at * length, -0.5 * span}};
      const int scatterers = uniform_int(rng, spec.min_scatterers, spec.max_scatterers);
      while (static_cast<int>(local.size()) < scatterers) {
        const double pick = uniform(rng, 0, 1);
        if (pick < 0.45)
          local.push_back({uniform(rng, -0.5, 0.5) * length, 0});
        else if (pick < 0.85)
          local.push_back({wing_at * length, uniform(rng, -0.5, 0.5) * span});
        else
          local.push_back({-0.45 * length, uniform(rng, -0.5, 0.5) * tail_span});
      }
      local.resize(scatterers);
      double x1 = 1e30, y1 = 1e30, x2 = -1e30, y2 = -1e30;
      for (auto [u, v] : local) {
        const double px = u * ux + v * vx, py = u * uy + v * vy;
        x1 = std::min(x1, px), x2 = std::max(x2, px);
        y1 = std::min(y1, py), y2 = std::max(y2, py);
      }
      const double margin = 4;
      const double lo_x = margin - x1, hi_x = n - margin - x2;
      const double lo_y = margin - y1, hi_y = n - margin - y2;
      if (hi_x <= lo_x || hi_y <= lo_y) continue;
      const double cx = uniform(rng, lo_x, hi_x), cy = uniform(rng, lo_y, hi_y);
      const Box box{cx + x1 - 2, cy + y1 - 2, cx + x2 + 2, cy + y2 + 2};
      if (overlaps(box, taken, 4)) continue;
      const double gain = uniform(rng, 0.6, 1.2);
      for (auto [u, v] : local)
        splat(refl, n, {cx + u * ux + v * vx, cy + u * uy + v * vy, uniform(rng, 0.7, 1.4),
                        gain * uniform(rng, 0.5, 1.0)});
      taken.push_back(box);
      scene.annotation.boxes.push_back(clip_box(box, n, n));
      scene.annotation.labels.push_back(1);
      break;
    }
  }

  // Unlabeled clutter: irregular clusters of broad blobs away from aircraft.
  for (int c = 0; c < spec.clutter_blobs; ++c) {
    for (int attempt = 0; attempt < 20; ++attempt) {
      const double cx = uniform(rng, 0, n), cy = uniform(rng, 0, n);
      const double radius = uniform(rng, 4, 14);
      const Box region{cx - radius, cy - radius, cx + radius, cy + radius};
      if (overlaps(region, taken, 6)) continue;
      const int parts = uniform_int(rng, 2, 6);
      const double amp = uniform(rng, 0.05, 0.35);
      for (int p = 0; p < parts; ++p)
        splat(refl, n, {cx + uniform(rng, -radius, radius) * 0.6, cy + uniform(rng, -radius, radius) * 0.6,
                        uniform(rng, 1.5, 4.0), amp * uniform(rng, 0.5, 1.0)});
      break;
    }
  }

  // Multiplicative speckle on intensity, then amplitude quantization.
  std::gamma_distribution<double> speckle(spec.looks, 1.0 / spec.looks);
  scene.image = Image(n, n);
  for (std::size_t i = 0; i < refl.size(); ++i) {
    const double amplitude = std::sqrt(refl[i] * speckle(rng));
    scene.image.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(amplitude * 170.0), 0L, 255L));
  }
  return scene;
}

// ---- Augmentation -----------------------------------------------------------

void mirror_horizontal(Image& img, Annotation& ann) {
  for (int y = 0; y < img.height; ++y) {
    auto row = img.pixels.begin() + static_cast<std::ptrdiff_t>(y) * img.width;
    std::reverse(row, row + img.width);
  }
  for (Box& b : ann.boxes) b = {img.width - b.x2, b.y1, img.width - b.x1, b.y2};
}

void flip_vertical(Image& img, Annotation& ann) {
  for (int y = 0; y < img.height / 2; ++y)
    std::swap_ranges(img.pixels.begin() + static_cast<std::ptrdiff_t>(y) * img.width,
                     img.pixels.begin() + static_cast<std::ptrdiff_t>(y + 1) * img.width,
                     img.pixels.begin() + static_cast<std::ptrdiff_t>(img.height - 1 - y) * img.width);
  for (Box& b : ann.boxes) b = {b.x1, img.height - b.y2, b.x2, img.height - b.y1};
}

void expand(Image& img, Annotation& ann, double factor, int offset_x, int offset_y, std::uint8_t fill) {
  const int w = static_cast<int>(std::lround(img.width * factor));
  const int h = static_cast<int>(std::lround(img.height * factor));
  if (offset_x < 0 || offset_y < 0 || offset_x + img.width > w || offset_y + img.height > h)
    throw std::invalid_argument("expand: placement outside the canvas");
  Image canvas(w, h, fill);
  for (int y = 0; y < img.height; ++y)
    std::copy_n(img.pixels.begin() + static_cast<std::ptrdiff_t>(y) * img.width, img.width,
                canvas.pixels.begin() + static_cast<std::ptrdiff_t>(y + offset_y) * w + offset_x);
  for (Box& b : ann.boxes) b = {b.x1 + offset_x, b.y1 + offset_y, b.x2 + offset_x, b.y2 + offset_y};
  img = std::move(canvas);
}

void crop(Image& img, Annotation& ann, int x0, int y0, int w, int h, double min_visible) {
  if (x0 < 0 || y0 < 0 || w < 1 || h < 1 || x0 + w > img.width || y0 + h > img.height)
    throw std::invalid_argument("crop: window outside the image");
  Image out(w, h);
  for (int y = 0; y < h; ++y)
    std::copy_n(img.pixels.begin() + static_cast<std::ptrdiff_t>(y + y0) * img.width + x0, w,
                out.pixels.begin() + static_cast<std::ptrdiff_t>(y) * w);
  Annotation kept;
  kept.image = ann.image;
  for (std::size_t i = 0; i < ann.boxes.size(); ++i) {
    const Box& b = ann.boxes[i];
    const Box c = clip_box({b.x1 - x0, b.y1 - y0, b.x2 - x0, b.y2 - y0}, w, h);
    if (!c.valid() || c.area() < min_visible * b.area()) continue;
    kept.boxes.push_back(c);
    kept.labels.push_back(i < ann.labels.size() ? ann.labels[i] : 1);
  }
  img = std::move(out);
  ann = std::move(kept);
}

void augment(Image& img, Annotation& ann, std::mt19937_64& rng, const AugmentConfig& cfg) {
  auto chance = [&](double p) { return uniform(rng, 0, 1) < p; };
  if (chance(cfg.p_contrast)) {
    const double alpha = uniform(rng, 0.7, 1.3);
    const double mean = mean_pixel(img);
    for (auto& p : img.pixels)
      p = static_cast<std::uint8_t>(std::clamp(std::lround((p - mean) * alpha + mean), 0L, 255L));
  }
  if (chance(cfg.p_illumination)) {
    const double gain = uniform(rng, 0.75, 1.25), shift = uniform(rng, -12, 12);
    for (auto& p : img.pixels)
      p = static_cast<std::uint8_t>(std::clamp(std::lround(p * gain + shift), 0L, 255L));
  }
  if (chance(cfg.p_expand) && cfg.max_expand > 1.0) {
    const double f = uniform(rng, 1.0, cfg.max_expand);
    const int w = static_cast<int>(std::lround(img.width * f));
    const int h = static_cast<int>(std::lround(img.height * f));
    expand(img, ann, f, uniform_int(rng, 0, w - img.width), uniform_int(rng, 0, h - img.height),
           mean_pixel(img));
  }
  if (chance(cfg.p_crop)) {
    const double s = uniform(rng, cfg.min_crop, 1.0);
    const int w = std::max(1, static_cast<int>(std::lround(img.width * s)));
    const int h = std::max(1, static_cast<int>(std::lround(img.height * s)));
    crop(img, ann, uniform_int(rng, 0, img.width - w), uniform_int(rng, 0, img.height - h), w, h,
         cfg.min_visible);
  }
  if (chance(cfg.p_mirror)) mirror_horizontal(img, ann);
  if (chance(cfg.p_flip)) flip_vertical(img, ann);
}

void resize_square(Image& img, Annotation& ann, int size) {
  if (img.width == size && img.height == size) return;
  Image out(size, size);
  const double sx = static_cast<double>(img.width) / size, sy = static_cast<double>(img.height) / size;
  for (int y = 0; y < size; ++y) {
    const int iy = std::min(img.height - 1, static_cast<int>((y + 0.5) * sy));
    for (int x = 0; x < size; ++x) {
      const int ix = std::min(img.width - 1, static_cast<int>((x + 0.5) * sx));
      out.at(x, y) = img.at(ix, iy);
    }
  }
  for (Box& b : ann.boxes) b = {b.x1 / sx, b.y1 / sy, b.x2 / sx, b.y2 / sy};
  img = std::move(out);
}

// ---- Tiling -----------------------------------------------------------------

Tiles tile_large_scene(const Image& scene, int tile, int overlap) {
  if (tile < 1 || overlap < 0 || overlap >= tile)
    throw std::invalid_argument("tile_large_scene: need tile > overlap >= 0");
  const int step = tile - overlap;
  auto origins = [&](int extent) {
    std::vector<int> o;
    for (int v = 0;; v += step) {
      o.push_back(v);
      if (v + tile >= extent) break;
    }
    return o;
  };
  Tiles out;
  for (int y0 : origins(scene.height))
    for (int x0 : origins(scene.width)) {
      Image t(tile, tile, 0);
      for (int y = 0; y < tile && y0 + y < scene.height; ++y) {
        const int w = std::min(tile, scene.width - x0);
        std::copy_n(scene.pixels.begin() + static_cast<std::ptrdiff_t>(y0 + y) * scene.width + x0, w,
                    t.pixels.begin() + static_cast<std::ptrdiff_t>(y) * tile);
      }
      out.tiles.push_back(std::move(t));
      out.placements.push_back({x0, y0});
    }
  return out;
}

std::vector<Detection> map_back(const std::vector<std::vector<Detection>>& per_tile,
                                const std::vector<TilePlacement>& placements, const NmsConfig& nms_cfg) {
  if (per_tile.size() != placements.size()) throw std::invalid_argument("map_back: tile count mismatch");
  std::vector<Detection> all;
  for (std::size_t t = 0; t < per_tile.size(); ++t)
    for (Detection d : per_tile[t]) {
      d.box = {d.box.x1 + placements[t].x0, d.box.y1 + placements[t].y0, d.box.x2 + placements[t].x0,
               d.box.y2 + placements[t].y0};
      all.push_back(d);
    }
  NmsConfig cfg = nms_cfg;
  cfg.pre_top_k = -1;
  cfg.keep = -1;
  return nms(std::move(all), cfg);
}

// ---- PNG --------------------------------------------------------------------

void write_png(const std::filesystem::path& path, const Image& img) {
  FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw std::runtime_error("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
    throw std::runtime_error("libpng failed writing " + path.string());
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    png_write_row(png, const_cast<png_bytep>(img.pixels.data() + static_cast<std::size_t>(y) * img.width));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

Image read_png(const std::filesystem::path& path) {
  FILE* f = std::fopen(path.string().c_str(), "rb");
  if (!f) throw std::runtime_error("cannot read image " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  Image img;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(f);
    throw std::runtime_error("not a readable PNG: " + path.string());
  }
  png_init_io(png, f);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);
  img = Image(static_cast<int>(png_get_image_width(png, info)), static_cast<int>(png_get_image_height(png, info)));
  for (int y = 0; y < img.height; ++y)
    png_read_row(png, img.pixels.data() + static_cast<std::size_t>(y) * img.width, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(f);
  return img;
}

// ---- Annotations ------------------------------------------------------------

std::string annotation_to_json(const Annotation& ann) {
  json boxes = json::array();
  for (const Box& b : ann.boxes) boxes.push_back({b.x1, b.y1, b.x2, b.y2});
  return json{{"image", ann.image}, {"boxes", boxes}, {"labels", ann.labels}}.dump();
}

Annotation annotation_from_json(const std::string& line, int line_no) {
  auto fail = [&](const std::string& why) {
    return std::runtime_error("annotations line " + std::to_string(line_no) + ": " + why);
  };
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error&) {
    throw fail("not valid JSON");
  }
  if (!j.is_object() || !j.contains("image") || !j.contains("boxes") || !j["image"].is_string() ||
      !j["boxes"].is_array())
    throw fail("expected {image, boxes, labels}");
  Annotation a;
  a.image = j["image"].get<std::string>();
  for (const auto& b : j["boxes"]) {
    if (!b.is_array() || b.size() != 4) throw fail("box must have four numbers");
    for (const auto& v : b)
      if (!v.is_number()) throw fail("box must have four numbers");
    a.boxes.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()});
    if (!a.boxes.back().valid()) throw fail("box with non-positive extent");
  }
  if (j.contains("labels")) {
    if (!j["labels"].is_array() || j["labels"].size() != a.boxes.size()) throw fail("labels must match boxes");
    for (const auto& v : j["labels"]) {
      if (!v.is_number_integer()) throw fail("labels must be integers");
      a.labels.push_back(v.get<int>());
    }
  } else {
    a.labels.assign(a.boxes.size(), 1);
  }
  return a;
}

void write_annotations(const std::filesystem::path& path, const std::vector<Annotation>& anns) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  for (const Annotation& a : anns) f << annotation_to_json(a) << "\n";
}

std::vector<Annotation> read_annotations(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::vector<Annotation> out;
  std::string line;
  int n = 0;
  while (std::getline(f, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(annotation_from_json(line, n));
  }
  return out;
}

// ---- Split ------------------------------------------------------------------

Split make_split(const std::vector<std::string>& ids, std::uint64_t seed) {
  const std::size_t n = ids.size();
  const std::size_t train = n * 5 / 10, val = n * 2 / 10;
  return make_split(ids, seed, train, val, n - train - val);
}

Split make_split(const std::vector<std::string>& ids, std::uint64_t seed, std::size_t train,
                 std::size_t val, std::size_t test) {
  if (train + val + test != ids.size()) throw std::invalid_argument("make_split: counts do not sum to ids");
  std::vector<std::string> order = ids;
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the order is independent of the
  // standard library's shuffle.
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  Split s;
  s.train.assign(order.begin(), order.begin() + train);
  s.val.assign(order.begin() + train, order.begin() + train + val);
  s.test.assign(order.begin() + train + val, order.end());
  for (auto* part : {&s.train, &s.val, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

void write_split(const std::filesystem::path& path, const Split& s) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << json{{"train", s.train}, {"val", s.val}, {"test", s.test}}.dump(2) << "\n";
}

Split read_split(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  try {
    const json j = json::parse(f);
    Split s;
    s.train = j.value("train", std::vector<std::string>{});
    s.val = j.value("val", std::vector<std::string>{});
    s.test = j.value("test", std::vector<std::string>{});
    return s;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed split file " + path.string() + ": " + e.what());
  }
}

// ---- Dataset ----------------------------------------------------------------

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void synthesize_dataset(const std::filesystem::path& root, const SceneSpec& spec, int total,
                        std::uint64_t seed, int train, int val, int test) {
  const bool explicit_counts = train > 0 || val > 0 || test > 0;
  if (explicit_counts) total = train + val + test;
  std::filesystem::create_directories(root / "images");
  std::vector<Annotation> anns;
  std::vector<std::string> ids;
  for (int i = 0; i < total; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%05d", i);
    SceneSpec s = spec;
    s.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    Scene scene = generate_scene(s);
    scene.annotation.image = std::string("images/") + name + ".png";
    write_png(root / scene.annotation.image, scene.image);
    anns.push_back(std::move(scene.annotation));
    ids.push_back(name);
  }
  write_annotations(root / "annotations.jsonl", anns);
  const std::uint64_t split_seed = derive_seed(seed, 0xFFFFFFFFull);
  write_split(root / "split.json", explicit_counts ? make_split(ids, split_seed, train, val, test)
                                                   : make_split(ids, split_seed));
}

Dataset Dataset::open(const std::filesystem::path& root) {
  Dataset d;
  d.root = root;
  if (std::filesystem::exists(root / "annotations.jsonl")) d.annotations = read_annotations(root / "annotations.jsonl");
  if (std::filesystem::exists(root / "split.json")) d.split = read_split(root / "split.json");
  return d;
}

std::vector<const Annotation*> Dataset::subset(const std::string& which) const {
  const std::vector<std::string>* ids = nullptr;
  if (which == "train") ids = &split.train;
  else if (which == "val") ids = &split.val;
  else if (which == "test") ids = &split.test;
  else if (which != "all") throw std::invalid_argument("unknown split '" + which + "'");
  std::vector<const Annotation*> out;
  if (!ids) {
    for (const Annotation& a : annotations) out.push_back(&a);
    return out;
  }
  std::map<std::string, const Annotation*> by_id;
  for (const Annotation& a : annotations) by_id[std::filesystem::path(a.image).stem().string()] = &a;
  for (const std::string& id : *ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw std::runtime_error("split names unknown image '" + id + "'");
    out.push_back(it->second);
  }
  return out;
}

}  // namespace afran
