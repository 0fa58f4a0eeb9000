// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vqamix/common.hpp"
#include "vqamix/example.hpp"

namespace vqamix {

enum class Shape : uint8_t { circle, square, triangle, star };
enum class Color : uint8_t { red, green, blue, yellow, purple, orange };
enum class ObjSize : uint8_t { small, large };

inline constexpr int kNumShapes = 4;
inline constexpr int kNumColors = 6;

const std::string& shape_name(Shape s);
const std::string& shape_plural(Shape s);
const std::string& color_name(Color c);
const std::string& size_name(ObjSize s);
int shape_from_name(const std::string& s);   // -1 if not a shape word
int shape_from_plural(const std::string& s);
int color_from_name(const std::string& s);
int size_from_name(const std::string& s);

struct SceneObject {
  Shape shape;
  Color color;
  ObjSize size;
  int row = 0, col = 0;
  bool operator==(const SceneObject&) const = default;
};

struct SceneSpec {
  int grid_rows = 4, grid_cols = 4;
  int min_objects = 1, max_objects = 4;
  int image_h = 32, image_w = 32;
  void validate() const;
};

// Symbolic scene plus its deterministic raster. Objects are kept in row-major
// cell order; the raster is a pure function of (grid, objects, resolution).
struct Scene {
  int grid_rows = 0, grid_cols = 0;
  std::vector<SceneObject> objects;
  Image raster;

  uint64_t id() const;  // hash of the symbolic content only
  // "a small red circle" for the object at index i.
  std::string object_phrase(int i) const;
};

Image render_scene_raster(int grid_rows, int grid_cols, const std::vector<SceneObject>& objects,
                          int image_h, int image_w);

Scene gen_scene(Rng& rng, const SceneSpec& spec);

}  // namespace vqamix
