// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#include "vqamix/example.hpp"

#include <array>
#include <fstream>
#include <istream>
#include <ostream>

namespace vqamix {

namespace {

const std::array<const char*, 13> kTagNames = {
    "ic",        "cmp",     "mlm",         "itm",     "vqa_attr",    "count", "entail",
    "nlvr_pair", "compositional", "caption", "region_desc", "match_yesno", "detect_text"};

template <typename T>
void put(std::ostream& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (size_t i = 0; i < sizeof(T); ++i) {
    out.put(static_cast<char>(v & 0xff));
    v = static_cast<T>(v >> 8);
  }
}

template <typename T>
T get(std::istream& in) {
  static_assert(std::is_integral_v<T>);
  using U = std::make_unsigned_t<T>;
  U v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) {
    int c = in.get();
    if (c == EOF) throw IoError("example stream: unexpected end of file");
    v |= static_cast<U>(static_cast<uint8_t>(c)) << (8 * i);
  }
  return static_cast<T>(v);
}

void put_string(std::ostream& out, const std::string& s) {
  put<uint32_t>(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  uint32_t n = get<uint32_t>(in);
  std::string s(n, '\0');
  if (!in.read(s.data(), n)) throw IoError("example stream: truncated string");
  return s;
}

}  // namespace

std::string to_string(TaskTag t) { return kTagNames[static_cast<size_t>(t)]; }

TaskTag task_tag_from_string(const std::string& s) {
  for (size_t i = 0; i < kTagNames.size(); ++i)
    if (s == kTagNames[i]) return static_cast<TaskTag>(i);
  throw DataError("unknown task tag '" + s + "'");
}

void write_examples(std::ostream& out, const std::vector<TaskExample>& v) {
  put<uint32_t>(out, 0x5651524bu);  // stream magic
  put<uint64_t>(out, v.size());
  for (const TaskExample& e : v) {
    put<uint8_t>(out, static_cast<uint8_t>(e.images.size()));
    for (const Image& im : e.images) {
      put<uint16_t>(out, static_cast<uint16_t>(im.h));
      put<uint16_t>(out, static_cast<uint16_t>(im.w));
      out.write(reinterpret_cast<const char*>(im.rgb.data()),
                static_cast<std::streamsize>(im.rgb.size()));
    }
    put_string(out, e.input_text);
    put_string(out, e.target_text);
    put<uint8_t>(out, static_cast<uint8_t>(e.tag));
    put<uint64_t>(out, e.scene_id);
    put<uint64_t>(out, e.scene_id2);
  }
}

std::vector<TaskExample> read_examples(std::istream& in) {
  if (get<uint32_t>(in) != 0x5651524bu) throw IoError("example stream: bad magic");
  uint64_t n = get<uint64_t>(in);
  std::vector<TaskExample> out;
  out.reserve(n);
  for (uint64_t i = 0; i < n; ++i) {
    TaskExample e;
    uint8_t n_images = get<uint8_t>(in);
    if (n_images < 1 || n_images > 2)
      throw IoError("example stream: record must hold 1 or 2 images");
    for (int k = 0; k < n_images; ++k) {
      Image im;
      im.h = get<uint16_t>(in);
      im.w = get<uint16_t>(in);
      im.rgb.resize(static_cast<size_t>(im.h) * im.w * 3);
      if (!in.read(reinterpret_cast<char*>(im.rgb.data()),
                   static_cast<std::streamsize>(im.rgb.size())))
        throw IoError("example stream: truncated image");
      e.images.push_back(std::move(im));
    }
    e.input_text = get_string(in);
    e.target_text = get_string(in);
    uint8_t tag = get<uint8_t>(in);
    if (tag >= kTagNames.size()) throw IoError("example stream: bad task tag byte");
    e.tag = static_cast<TaskTag>(tag);
    e.scene_id = get<uint64_t>(in);
    e.scene_id2 = get<uint64_t>(in);
    out.push_back(std::move(e));
  }
  return out;
}

void save_examples(const std::string& path, const std::vector<TaskExample>& v) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_examples(out, v);
  if (!out) throw IoError("write failed for " + path);
}

std::vector<TaskExample> load_examples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read dataset file " + path);
  return read_examples(in);
}

}  // namespace vqamix
