// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vqamix/common.hpp"

namespace vqamix {

// 8-bit RGB raster.
struct Image {
  int h = 0, w = 0;
  std::vector<uint8_t> rgb;  // h*w*3 row-major

  uint8_t& at(int y, int x, int c) { return rgb[(static_cast<size_t>(y) * w + x) * 3 + c]; }
  uint8_t at(int y, int x, int c) const { return rgb[(static_cast<size_t>(y) * w + x) * 3 + c]; }
  bool operator==(const Image&) const = default;
};

enum class TaskTag : uint8_t {
  ic,
  cmp,
  mlm,
  itm,
  vqa_attr,
  count,
  entail,
  nlvr_pair,
  compositional,
  caption,
  region_desc,
  match_yesno,
  detect_text,
};

std::string to_string(TaskTag t);
TaskTag task_tag_from_string(const std::string& s);

// The universal record for every pretraining and downstream task. The tag is
// metadata only; it never reaches the loss computation.
struct TaskExample {
  std::vector<Image> images;  // 1 or 2
  std::string input_text;
  std::string target_text;
  TaskTag tag = TaskTag::ic;
  uint64_t scene_id = 0;   // provenance of images[0]; 0 when not scene-backed
  uint64_t scene_id2 = 0;  // provenance of images[1]

  bool operator==(const TaskExample&) const = default;
};

// Length-prefixed binary record stream, little-endian.
void write_examples(std::ostream& out, const std::vector<TaskExample>& v);
std::vector<TaskExample> read_examples(std::istream& in);
void save_examples(const std::string& path, const std::vector<TaskExample>& v);
std::vector<TaskExample> load_examples(const std::string& path);

}  // namespace vqamix
