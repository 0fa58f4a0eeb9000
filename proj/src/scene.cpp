// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#include "vqamix/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace vqamix {

namespace {
const std::array<std::string, 4> kShapeNames = {"circle", "square", "triangle", "star"};
const std::array<std::string, 4> kShapePlurals = {"circles", "squares", "triangles", "stars"};
const std::array<std::string, 6> kColorNames = {"red", "green", "blue", "yellow", "purple",
                                                "orange"};
const std::array<std::string, 2> kSizeNames = {"small", "large"};

struct Rgb {
  uint8_t r, g, b;
};
const std::array<Rgb, 6> kColorRgb = {{{220, 44, 44},
                                       {52, 196, 72},
                                       {56, 96, 220},
                                       {230, 218, 56},
                                       {164, 64, 200},
                                       {240, 144, 40}}};
constexpr Rgb kBackground = {26, 26, 30};
}  // namespace

const std::string& shape_name(Shape s) { return kShapeNames[static_cast<size_t>(s)]; }
const std::string& shape_plural(Shape s) { return kShapePlurals[static_cast<size_t>(s)]; }
const std::string& color_name(Color c) { return kColorNames[static_cast<size_t>(c)]; }
const std::string& size_name(ObjSize s) { return kSizeNames[static_cast<size_t>(s)]; }

namespace {
template <size_t N>
int index_of(const std::array<std::string, N>& names, const std::string& s) {
  for (size_t i = 0; i < N; ++i)
    if (names[i] == s) return static_cast<int>(i);
  return -1;
}
}  // namespace

int shape_from_name(const std::string& s) { return index_of(kShapeNames, s); }
int shape_from_plural(const std::string& s) { return index_of(kShapePlurals, s); }
int color_from_name(const std::string& s) { return index_of(kColorNames, s); }
int size_from_name(const std::string& s) { return index_of(kSizeNames, s); }

void SceneSpec::validate() const {
  if (grid_rows < 2 || grid_cols < 2) throw ConfigError("scene grid must be at least 2x2");
  if (min_objects < 1) throw ConfigError("scenes need at least one object");
  if (max_objects < min_objects) throw ConfigError("scene object range is empty");
  if (max_objects > grid_rows * grid_cols)
    throw ConfigError("scene spec demands more objects (" + std::to_string(max_objects) +
                      ") than grid cells (" + std::to_string(grid_rows * grid_cols) + ")");
  if (image_h < grid_rows || image_w < grid_cols || image_h % grid_rows != 0 ||
      image_w % grid_cols != 0)
    throw ConfigError("image resolution must be a multiple of the grid extents");
}

uint64_t Scene::id() const {
  std::vector<uint8_t> buf;
  buf.push_back(static_cast<uint8_t>(grid_rows));
  buf.push_back(static_cast<uint8_t>(grid_cols));
  for (const SceneObject& o : objects) {
    buf.push_back(static_cast<uint8_t>(o.shape));
    buf.push_back(static_cast<uint8_t>(o.color));
    buf.push_back(static_cast<uint8_t>(o.size));
    buf.push_back(static_cast<uint8_t>(o.row));
    buf.push_back(static_cast<uint8_t>(o.col));
  }
  return fnv1a64(buf.data(), buf.size());
}

std::string Scene::object_phrase(int i) const {
  const SceneObject& o = objects[static_cast<size_t>(i)];
  return "a " + size_name(o.size) + " " + color_name(o.color) + " " + shape_name(o.shape);
}

namespace {
bool inside_shape(Shape shape, double dx, double dy, double r) {
  switch (shape) {
    case Shape::circle:
      return dx * dx + dy * dy <= r * r;
    case Shape::square:
      return std::abs(dx) <= r * 0.85 && std::abs(dy) <= r * 0.85;
    case Shape::triangle:
      return dy >= -r && dy <= r && std::abs(dx) <= (dy + r) * 0.55;
    case Shape::star:  // plus-shaped marker
      return (std::abs(dx) <= r * 0.34 && std::abs(dy) <= r) ||
             (std::abs(dy) <= r * 0.34 && std::abs(dx) <= r);
  }
  return false;
}
}  // namespace

Image render_scene_raster(int grid_rows, int grid_cols, const std::vector<SceneObject>& objects,
                          int image_h, int image_w) {
  Image im;
  im.h = image_h;
  im.w = image_w;
  im.rgb.assign(static_cast<size_t>(image_h) * image_w * 3, 0);
  for (int y = 0; y < image_h; ++y)
    for (int x = 0; x < image_w; ++x) {
      im.at(y, x, 0) = kBackground.r;
      im.at(y, x, 1) = kBackground.g;
      im.at(y, x, 2) = kBackground.b;
    }
  int cell_h = image_h / grid_rows;
  int cell_w = image_w / grid_cols;
  double base = 0.5 * std::min(cell_h, cell_w);
  for (const SceneObject& o : objects) {
    double r = (o.size == ObjSize::large ? 0.92 : 0.52) * base;
    double cy = o.row * cell_h + (cell_h - 1) / 2.0;
    double cx = o.col * cell_w + (cell_w - 1) / 2.0;
    Rgb rgb = kColorRgb[static_cast<size_t>(o.color)];
    for (int y = o.row * cell_h; y < (o.row + 1) * cell_h; ++y)
      for (int x = o.col * cell_w; x < (o.col + 1) * cell_w; ++x)
        if (inside_shape(o.shape, x - cx, y - cy, r)) {
          im.at(y, x, 0) = rgb.r;
          im.at(y, x, 1) = rgb.g;
          im.at(y, x, 2) = rgb.b;
        }
  }
  return im;
}

Scene gen_scene(Rng& rng, const SceneSpec& spec) {
  spec.validate();
  Scene s;
  s.grid_rows = spec.grid_rows;
  s.grid_cols = spec.grid_cols;
  int cells = spec.grid_rows * spec.grid_cols;
  int n = rng.uniform_int(spec.min_objects, spec.max_objects);
  std::vector<int> cell_ids(static_cast<size_t>(cells));
  for (int i = 0; i < cells; ++i) cell_ids[static_cast<size_t>(i)] = i;
  rng.shuffle(cell_ids);
  for (int i = 0; i < n; ++i) {
    SceneObject o;
    o.shape = static_cast<Shape>(rng.uniform_int(0, kNumShapes - 1));
    o.color = static_cast<Color>(rng.uniform_int(0, kNumColors - 1));
    o.size = static_cast<ObjSize>(rng.uniform_int(0, 1));
    o.row = cell_ids[static_cast<size_t>(i)] / spec.grid_cols;
    o.col = cell_ids[static_cast<size_t>(i)] % spec.grid_cols;
    s.objects.push_back(o);
  }
  std::sort(s.objects.begin(), s.objects.end(), [](const SceneObject& a, const SceneObject& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  s.raster = render_scene_raster(s.grid_rows, s.grid_cols, s.objects, spec.image_h, spec.image_w);
  return s;
}

}  // namespace vqamix
