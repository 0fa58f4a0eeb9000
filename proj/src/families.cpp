// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#include "vqamix/families.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "vqamix/vocab.hpp"

namespace vqamix {

namespace {

const std::array<std::string, kNumFamilies> kFamilyNames = {
    "vqa_attr",      "count",   "entail",      "nlvr_pair",   "compositional",
    "caption",       "region_desc", "match_yesno", "detect_text"};

const std::array<std::string, 4> kQuadrantNames = {"top left", "top right", "bottom left",
                                                   "bottom right"};

int count_shape(const Scene& s, Shape sh) {
  int n = 0;
  for (const auto& o : s.objects) n += (o.shape == sh);
  return n;
}
int count_color(const Scene& s, Color c) {
  int n = 0;
  for (const auto& o : s.objects) n += (o.color == c);
  return n;
}
bool has_combo(const Scene& s, Color c, Shape sh) {
  for (const auto& o : s.objects)
    if (o.color == c && o.shape == sh) return true;
  return false;
}
int unique_shape_index(const Scene& s, Shape sh) {
  int idx = -1;
  for (size_t i = 0; i < s.objects.size(); ++i)
    if (s.objects[i].shape == sh) {
      if (idx >= 0) return -1;
      idx = static_cast<int>(i);
    }
  return idx;
}
int unique_color_index(const Scene& s, Color c) {
  int idx = -1;
  for (size_t i = 0; i < s.objects.size(); ++i)
    if (s.objects[i].color == c) {
      if (idx >= 0) return -1;
      idx = static_cast<int>(i);
    }
  return idx;
}
int quadrant_of(const Scene& s, const SceneObject& o) {
  int top = (o.row * 2 < s.grid_rows) ? 0 : 1;
  int left = (o.col * 2 < s.grid_cols) ? 0 : 1;
  return top == 0 ? (left == 0 ? 0 : 1) : (left == 0 ? 2 : 3);
}
std::vector<int> objects_in_quadrant(const Scene& s, int q) {
  std::vector<int> out;
  for (size_t i = 0; i < s.objects.size(); ++i)
    if (quadrant_of(s, s.objects[i]) == q) out.push_back(static_cast<int>(i));
  return out;
}

std::string join_phrases(const Scene& s, const std::vector<int>& idx) {
  if (idx.empty()) return "nothing";
  std::string out;
  for (size_t k = 0; k < idx.size(); ++k) {
    if (k) out += " and ";
    out += s.object_phrase(idx[k]);
  }
  return out;
}

std::string caption_text(const Scene& s) {
  std::vector<int> all(s.objects.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return join_phrases(s, all);
}

std::string detect_target(const Scene& s) {
  std::string out;
  for (size_t i = 0; i < s.objects.size(); ++i) {
    if (i) out += ' ';
    out += shape_name(s.objects[i].shape);
  }
  return out;
}

int spelled_to_int(const std::string& w) {
  for (int n = 0; n <= 20; ++n)
    if (spell_number(n) == w) return n;
  return -1;
}

// --- question text parsing helpers (token based) ---
std::vector<std::string> words_of(const std::string& s) { return tokenize(s); }

bool starts_with(const std::vector<std::string>& w, std::initializer_list<const char*> prefix) {
  if (w.size() < prefix.size()) return false;
  size_t i = 0;
  for (const char* p : prefix)
    if (w[i++] != p) return false;
  return true;
}

[[noreturn]] void bad_question(Family f, const std::string& q) {
  throw DataError("family " + to_string(f) + ": unparseable question '" + q + "'");
}

int parse_quadrant(const std::string& a, const std::string& b) {
  for (size_t q = 0; q < kQuadrantNames.size(); ++q)
    if (kQuadrantNames[q] == a + " " + b) return static_cast<int>(q);
  return -1;
}

}  // namespace

std::string to_string(Family f) { return kFamilyNames[static_cast<size_t>(f)]; }

Family family_from_string(const std::string& s) {
  for (size_t i = 0; i < kFamilyNames.size(); ++i)
    if (kFamilyNames[i] == s) return static_cast<Family>(i);
  throw ConfigError("unknown task family '" + s + "'");
}

TaskTag tag_of(Family f) {
  switch (f) {
    case Family::vqa_attr: return TaskTag::vqa_attr;
    case Family::count: return TaskTag::count;
    case Family::entail: return TaskTag::entail;
    case Family::nlvr_pair: return TaskTag::nlvr_pair;
    case Family::compositional: return TaskTag::compositional;
    case Family::caption: return TaskTag::caption;
    case Family::region_desc: return TaskTag::region_desc;
    case Family::match_yesno: return TaskTag::match_yesno;
    case Family::detect_text: return TaskTag::detect_text;
  }
  throw DataError("bad family");
}

int scenes_needed(Family f) { return f == Family::nlvr_pair ? 2 : 1; }

SceneSpec scene_spec_for(Family f, SceneSpec base) {
  if (f == Family::match_yesno) {
    base.min_objects = 1;
    base.max_objects = 1;
  }
  return base;
}

// ---------------------------------------------------------------------------
// question generation
// ---------------------------------------------------------------------------

namespace {

std::pair<std::string, std::string> gen_vqa_attr(const Scene& s, Rng& rng) {
  struct Cand {
    int kind;  // 0: color of unique shape, 1: shape of unique color
    int value;
  };
  std::vector<Cand> cands;
  for (int sh = 0; sh < kNumShapes; ++sh)
    if (count_shape(s, static_cast<Shape>(sh)) == 1) cands.push_back({0, sh});
  for (int c = 0; c < kNumColors; ++c)
    if (count_color(s, static_cast<Color>(c)) == 1) cands.push_back({1, c});
  if (cands.empty()) throw DataError("vqa_attr: no uniquely identified object in scene");
  Cand pick = cands[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(cands.size()) - 1))];
  if (pick.kind == 0) {
    Shape sh = static_cast<Shape>(pick.value);
    int idx = unique_shape_index(s, sh);
    return {"what color is the " + shape_name(sh), color_name(s.objects[idx].color)};
  }
  Color c = static_cast<Color>(pick.value);
  int idx = unique_color_index(s, c);
  return {"what shape is the " + color_name(c) + " object", shape_name(s.objects[idx].shape)};
}

std::pair<std::string, std::string> gen_count(const Scene& s, Rng& rng) {
  int kind = rng.uniform_int(0, 2);
  if (kind == 0) {
    Color c;
    if (!s.objects.empty() && rng.bernoulli(0.75))
      c = rng.pick(s.objects).color;
    else
      c = static_cast<Color>(rng.uniform_int(0, kNumColors - 1));
    return {"how many " + color_name(c) + " objects are there", spell_number(count_color(s, c))};
  }
  if (kind == 1) {
    Shape sh;
    if (!s.objects.empty() && rng.bernoulli(0.75))
      sh = rng.pick(s.objects).shape;
    else
      sh = static_cast<Shape>(rng.uniform_int(0, kNumShapes - 1));
    return {"how many " + shape_plural(sh) + " are there", spell_number(count_shape(s, sh))};
  }
  return {"how many objects are there", spell_number(static_cast<int>(s.objects.size()))};
}

std::pair<std::string, std::string> gen_entail(const Scene& s, Rng& rng) {
  std::vector<int> absent_shapes;
  for (int sh = 0; sh < kNumShapes; ++sh)
    if (count_shape(s, static_cast<Shape>(sh)) == 0) absent_shapes.push_back(sh);
  std::vector<int> unique_shapes;
  for (int sh = 0; sh < kNumShapes; ++sh)
    if (count_shape(s, static_cast<Shape>(sh)) == 1) unique_shapes.push_back(sh);

  std::vector<int> labels = {0, 1};  // true, false always constructible
  if (!absent_shapes.empty()) labels.push_back(2);
  int label = labels[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(labels.size()) - 1))];

  if (label == 2) {
    Shape sh = static_cast<Shape>(rng.pick(absent_shapes));
    Color c = static_cast<Color>(rng.uniform_int(0, kNumColors - 1));
    return {"the " + shape_name(sh) + " is " + color_name(c), "neutral"};
  }
  if (label == 0) {
    if (!unique_shapes.empty() && rng.bernoulli(0.5)) {
      Shape sh = static_cast<Shape>(rng.pick(unique_shapes));
      int idx = unique_shape_index(s, sh);
      return {"the " + shape_name(sh) + " is " + color_name(s.objects[idx].color), "true"};
    }
    const SceneObject& o = rng.pick(s.objects);
    return {"there is a " + color_name(o.color) + " " + shape_name(o.shape), "true"};
  }
  // false
  if (!unique_shapes.empty() && rng.bernoulli(0.5)) {
    Shape sh = static_cast<Shape>(rng.pick(unique_shapes));
    int idx = unique_shape_index(s, sh);
    Color wrong = s.objects[idx].color;
    while (wrong == s.objects[idx].color)
      wrong = static_cast<Color>(rng.uniform_int(0, kNumColors - 1));
    return {"the " + shape_name(sh) + " is " + color_name(wrong), "false"};
  }
  for (int tries = 0; tries < 64; ++tries) {
    Color c = static_cast<Color>(rng.uniform_int(0, kNumColors - 1));
    Shape sh = static_cast<Shape>(rng.uniform_int(0, kNumShapes - 1));
    if (!has_combo(s, c, sh))
      return {"there is a " + color_name(c) + " " + shape_name(sh), "false"};
  }
  throw DataError("entail: could not construct a false statement");
}

std::pair<std::string, std::string> gen_nlvr(const Scene& left, const Scene& right, Rng& rng) {
  int kind = rng.uniform_int(0, 3);
  Shape sh = static_cast<Shape>(rng.uniform_int(0, kNumShapes - 1));
  int nl = count_shape(left, sh), nr = count_shape(right, sh);
  if (kind == 0)
    return {"the left image has more " + shape_plural(sh) + " than the right image",
            nl > nr ? "true" : "false"};
  if (kind == 1)
    return {"the right image has more " + shape_plural(sh) + " than the left image",
            nr > nl ? "true" : "false"};
  bool about_left = (kind == 2);
  int actual = about_left ? nl : nr;
  int number = rng.bernoulli(0.5) ? actual : rng.uniform_int(0, 4);
  return {"the " + std::string(about_left ? "left" : "right") + " image has exactly " +
              spell_number(number) + " " + shape_plural(sh),
          number == actual ? "true" : "false"};
}

std::pair<std::string, std::string> gen_compositional(const Scene& s, Rng& rng) {
  struct Cand {
    int kind;
    int a, b;
  };
  std::vector<Cand> cands;
  for (int sz = 0; sz < 2; ++sz)
    for (int sh = 0; sh < kNumShapes; ++sh) {
      int cnt = 0, idx = -1;
      for (size_t i = 0; i < s.objects.size(); ++i)
        if (s.objects[i].size == static_cast<ObjSize>(sz) &&
            s.objects[i].shape == static_cast<Shape>(sh)) {
          ++cnt;
          idx = static_cast<int>(i);
        }
      if (cnt == 1) cands.push_back({0, sz * kNumShapes + sh, idx});
    }
  for (int q = 0; q < 4; ++q)
    if (objects_in_quadrant(s, q).size() == 1) cands.push_back({1, q, 0});
  for (int c = 0; c < kNumColors; ++c)
    if (unique_color_index(s, static_cast<Color>(c)) >= 0) cands.push_back({2, c, 0});
  for (int q = 0; q < 4; ++q)
    for (int sh = 0; sh < kNumShapes; ++sh) {
      auto idx = objects_in_quadrant(s, q);
      int cnt = 0, hit = -1;
      for (int i : idx)
        if (s.objects[static_cast<size_t>(i)].shape == static_cast<Shape>(sh)) {
          ++cnt;
          hit = i;
        }
      if (cnt == 1) cands.push_back({3, q * kNumShapes + sh, hit});
    }
  if (cands.empty()) throw DataError("compositional: no candidate question for scene");
  Cand pick = cands[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(cands.size()) - 1))];
  if (pick.kind == 0) {
    ObjSize sz = static_cast<ObjSize>(pick.a / kNumShapes);
    Shape sh = static_cast<Shape>(pick.a % kNumShapes);
    return {"what color is the " + size_name(sz) + " " + shape_name(sh),
            color_name(s.objects[static_cast<size_t>(pick.b)].color)};
  }
  if (pick.kind == 1) {
    int q = pick.a;
    int idx = objects_in_quadrant(s, q)[0];
    return {"what shape is in the " + kQuadrantNames[static_cast<size_t>(q)],
            shape_name(s.objects[static_cast<size_t>(idx)].shape)};
  }
  if (pick.kind == 3) {
    int q = pick.a / kNumShapes;
    Shape sh = static_cast<Shape>(pick.a % kNumShapes);
    return {"what color is the " + shape_name(sh) + " in the " +
                kQuadrantNames[static_cast<size_t>(q)],
            color_name(s.objects[static_cast<size_t>(pick.b)].color)};
  }
  Color c = static_cast<Color>(pick.a);
  int ref = unique_color_index(s, c);
  Shape sh = static_cast<Shape>(rng.uniform_int(0, kNumShapes - 1));
  bool found = false;
  for (size_t i = 0; i < s.objects.size(); ++i)
    if (static_cast<int>(i) != ref && s.objects[i].shape == sh &&
        s.objects[i].row == s.objects[static_cast<size_t>(ref)].row)
      found = true;
  return {"is there a " + shape_name(sh) + " in the same row as the " + color_name(c) + " object",
          found ? "yes" : "no"};
}

std::pair<std::string, std::string> gen_match_yesno(const Scene& s, Rng& rng) {
  if (s.objects.size() != 1)
    throw DataError("match_yesno expects single-object scenes");
  const SceneObject& o = s.objects[0];
  int kind = rng.uniform_int(0, 2);
  bool positive = rng.bernoulli(0.5);
  Color c = o.color;
  Shape sh = o.shape;
  if (!positive) {
    if (kind == 1 || (kind == 0 && rng.bernoulli(0.5))) {
      while (sh == o.shape) sh = static_cast<Shape>(rng.uniform_int(0, kNumShapes - 1));
    } else {
      while (c == o.color) c = static_cast<Color>(rng.uniform_int(0, kNumColors - 1));
    }
  }
  std::string q;
  bool match = false;
  if (kind == 0) {
    q = "is this a " + color_name(c) + " " + shape_name(sh);
    match = (c == o.color && sh == o.shape);
  } else if (kind == 1) {
    q = "is this a " + shape_name(sh);
    match = (sh == o.shape);
  } else {
    q = "is this a " + color_name(c) + " object";
    match = (c == o.color);
  }
  return {q, match ? "yes" : "no"};
}

}  // namespace

TaskExample render_task(const std::vector<Scene>& scenes, Family f, Rng& rng) {
  if (static_cast<int>(scenes.size()) != scenes_needed(f))
    throw DataError("family " + to_string(f) + " needs " + std::to_string(scenes_needed(f)) +
                    " scenes, got " + std::to_string(scenes.size()));
  TaskExample e;
  e.tag = tag_of(f);
  e.images.push_back(scenes[0].raster);
  e.scene_id = scenes[0].id();
  if (scenes.size() == 2) {
    e.images.push_back(scenes[1].raster);
    e.scene_id2 = scenes[1].id();
  }
  std::pair<std::string, std::string> qa;
  switch (f) {
    case Family::vqa_attr: qa = gen_vqa_attr(scenes[0], rng); break;
    case Family::count: qa = gen_count(scenes[0], rng); break;
    case Family::entail: qa = gen_entail(scenes[0], rng); break;
    case Family::nlvr_pair: qa = gen_nlvr(scenes[0], scenes[1], rng); break;
    case Family::compositional: qa = gen_compositional(scenes[0], rng); break;
    case Family::caption: qa = {"caption the image", caption_text(scenes[0])}; break;
    case Family::region_desc: {
      int q = rng.uniform_int(0, 3);
      qa = {"describe the " + kQuadrantNames[static_cast<size_t>(q)] + " region",
            join_phrases(scenes[0], objects_in_quadrant(scenes[0], q))};
      break;
    }
    case Family::match_yesno: qa = gen_match_yesno(scenes[0], rng); break;
    case Family::detect_text: qa = {"name every object in the image", detect_target(scenes[0])};
      break;
  }
  e.input_text = qa.first;
  e.target_text = qa.second;
  return e;
}

// ---------------------------------------------------------------------------
// the symbolic oracle (recomputes targets from question text)
// ---------------------------------------------------------------------------

std::string family_oracle(const std::vector<Scene>& scenes, Family f,
                          const std::string& input_text) {
  const std::vector<std::string> w = words_of(input_text);
  const Scene& s = scenes[0];
  switch (f) {
    case Family::vqa_attr: {
      if (starts_with(w, {"what", "color", "is", "the"}) && w.size() == 5) {
        int sh = shape_from_name(w[4]);
        if (sh < 0) bad_question(f, input_text);
        int idx = unique_shape_index(s, static_cast<Shape>(sh));
        if (idx < 0) throw DataError("vqa_attr oracle: shape not unique in scene");
        return color_name(s.objects[static_cast<size_t>(idx)].color);
      }
      if (starts_with(w, {"what", "shape", "is", "the"}) && w.size() == 6 && w[5] == "object") {
        int c = color_from_name(w[4]);
        if (c < 0) bad_question(f, input_text);
        int idx = unique_color_index(s, static_cast<Color>(c));
        if (idx < 0) throw DataError("vqa_attr oracle: color not unique in scene");
        return shape_name(s.objects[static_cast<size_t>(idx)].shape);
      }
      bad_question(f, input_text);
    }
    case Family::count: {
      if (!starts_with(w, {"how", "many"})) bad_question(f, input_text);
      if (w.size() == 5 && w[2] == "objects")
        return spell_number(static_cast<int>(s.objects.size()));
      if (w.size() == 6 && w[3] == "objects") {
        int c = color_from_name(w[2]);
        if (c < 0) bad_question(f, input_text);
        return spell_number(count_color(s, static_cast<Color>(c)));
      }
      if (w.size() == 5) {
        int sh = shape_from_plural(w[2]);
        if (sh < 0) bad_question(f, input_text);
        return spell_number(count_shape(s, static_cast<Shape>(sh)));
      }
      bad_question(f, input_text);
    }
    case Family::entail: {
      if (starts_with(w, {"there", "is", "a"}) && w.size() == 5) {
        int c = color_from_name(w[3]);
        int sh = shape_from_name(w[4]);
        if (c < 0 || sh < 0) bad_question(f, input_text);
        return has_combo(s, static_cast<Color>(c), static_cast<Shape>(sh)) ? "true" : "false";
      }
      if (w.size() == 4 && w[0] == "the" && w[2] == "is") {
        int sh = shape_from_name(w[1]);
        int c = color_from_name(w[3]);
        if (c < 0 || sh < 0) bad_question(f, input_text);
        int cnt = count_shape(s, static_cast<Shape>(sh));
        if (cnt == 0) return "neutral";
        if (cnt > 1) throw DataError("entail oracle: ambiguous definite statement");
        int idx = unique_shape_index(s, static_cast<Shape>(sh));
        return s.objects[static_cast<size_t>(idx)].color == static_cast<Color>(c) ? "true"
                                                                                  : "false";
      }
      bad_question(f, input_text);
    }
    case Family::nlvr_pair: {
      if (scenes.size() != 2) throw DataError("nlvr oracle needs two scenes");
      const Scene& right = scenes[1];
      if (w.size() == 10 && w[3] == "has" && w[4] == "more") {
        int sh = shape_from_plural(w[5]);
        if (sh < 0) bad_question(f, input_text);
        int nl = count_shape(s, static_cast<Shape>(sh));
        int nr = count_shape(right, static_cast<Shape>(sh));
        bool about_left = (w[1] == "left");
        return (about_left ? nl > nr : nr > nl) ? "true" : "false";
      }
      if (w.size() == 7 && w[3] == "has" && w[4] == "exactly") {
        int num = spelled_to_int(w[5]);
        int sh = shape_from_plural(w[6]);
        if (num < 0 || sh < 0) bad_question(f, input_text);
        bool about_left = (w[1] == "left");
        int actual = count_shape(about_left ? s : right, static_cast<Shape>(sh));
        return num == actual ? "true" : "false";
      }
      bad_question(f, input_text);
    }
    case Family::compositional: {
      if (starts_with(w, {"what", "color", "is", "the"}) && w.size() == 9 && w[5] == "in" &&
          w[6] == "the") {
        int sh = shape_from_name(w[4]);
        int q = parse_quadrant(w[7], w[8]);
        if (sh < 0 || q < 0) bad_question(f, input_text);
        auto idx = objects_in_quadrant(s, q);
        int cnt = 0, hit = -1;
        for (int i : idx)
          if (s.objects[static_cast<size_t>(i)].shape == static_cast<Shape>(sh)) {
            ++cnt;
            hit = i;
          }
        if (cnt != 1) throw DataError("compositional oracle: shape in quadrant not unique");
        return color_name(s.objects[static_cast<size_t>(hit)].color);
      }
      if (starts_with(w, {"what", "color", "is", "the"}) && w.size() == 6) {
        int sz = size_from_name(w[4]);
        int sh = shape_from_name(w[5]);
        if (sz < 0 || sh < 0) bad_question(f, input_text);
        int idx = -1, cnt = 0;
        for (size_t i = 0; i < s.objects.size(); ++i)
          if (s.objects[i].size == static_cast<ObjSize>(sz) &&
              s.objects[i].shape == static_cast<Shape>(sh)) {
            ++cnt;
            idx = static_cast<int>(i);
          }
        if (cnt != 1) throw DataError("compositional oracle: size+shape not unique");
        return color_name(s.objects[static_cast<size_t>(idx)].color);
      }
      if (starts_with(w, {"what", "shape", "is", "in", "the"}) && w.size() == 7) {
        int q = parse_quadrant(w[5], w[6]);
        if (q < 0) bad_question(f, input_text);
        auto idx = objects_in_quadrant(s, q);
        if (idx.size() != 1) throw DataError("compositional oracle: quadrant not unique");
        return shape_name(s.objects[static_cast<size_t>(idx[0])].shape);
      }
      if (starts_with(w, {"is", "there", "a"}) && w.size() == 12 && w[11] == "object") {
        int sh = shape_from_name(w[3]);
        int c = color_from_name(w[10]);
        if (sh < 0 || c < 0) bad_question(f, input_text);
        int ref = unique_color_index(s, static_cast<Color>(c));
        if (ref < 0) throw DataError("compositional oracle: color not unique");
        for (size_t i = 0; i < s.objects.size(); ++i)
          if (static_cast<int>(i) != ref && s.objects[i].shape == static_cast<Shape>(sh) &&
              s.objects[i].row == s.objects[static_cast<size_t>(ref)].row)
            return "yes";
        return "no";
      }
      bad_question(f, input_text);
    }
    case Family::caption:
      if (normalize(input_text) != "caption the image") bad_question(f, input_text);
      return caption_text(s);
    case Family::region_desc: {
      if (!starts_with(w, {"describe", "the"}) || w.size() != 5 || w[4] != "region")
        bad_question(f, input_text);
      int q = parse_quadrant(w[2], w[3]);
      if (q < 0) bad_question(f, input_text);
      return join_phrases(s, objects_in_quadrant(s, q));
    }
    case Family::match_yesno: {
      if (s.objects.size() != 1) throw DataError("match_yesno oracle: not a single-object scene");
      const SceneObject& o = s.objects[0];
      if (!starts_with(w, {"is", "this", "a"})) bad_question(f, input_text);
      if (w.size() == 4) {
        int sh = shape_from_name(w[3]);
        if (sh < 0) bad_question(f, input_text);
        return o.shape == static_cast<Shape>(sh) ? "yes" : "no";
      }
      if (w.size() == 5 && w[4] == "object") {
        int c = color_from_name(w[3]);
        if (c < 0) bad_question(f, input_text);
        return o.color == static_cast<Color>(c) ? "yes" : "no";
      }
      if (w.size() == 5) {
        int c = color_from_name(w[3]);
        int sh = shape_from_name(w[4]);
        if (c < 0 || sh < 0) bad_question(f, input_text);
        return (o.color == static_cast<Color>(c) && o.shape == static_cast<Shape>(sh)) ? "yes"
                                                                                       : "no";
      }
      bad_question(f, input_text);
    }
    case Family::detect_text:
      if (normalize(input_text) != "name every object in the image") bad_question(f, input_text);
      return detect_target(s);
  }
  bad_question(f, input_text);
}

// ---------------------------------------------------------------------------
// dataset construction and persistence
// ---------------------------------------------------------------------------

FamilyDataset build_dataset(Family f, int n_examples, uint64_t seed, const SceneSpec& base_spec,
                            const std::unordered_set<uint64_t>& exclusion) {
  if (n_examples < 1) throw ConfigError("build_dataset: n_examples must be >= 1");
  SceneSpec spec = scene_spec_for(f, base_spec);
  spec.validate();
  FamilyDataset ds;
  ds.name = to_string(f);
  ds.family = f;
  ds.seed = seed;
  Rng rng(derive_seed(seed, "dataset:" + to_string(f)));
  std::unordered_set<uint64_t> seen;
  const int budget = 256;
  for (int i = 0; i < n_examples; ++i) {
    bool done = false;
    for (int attempt = 0; attempt < budget && !done; ++attempt) {
      std::vector<Scene> scenes;
      bool excluded = false;
      for (int k = 0; k < scenes_needed(f); ++k) {
        scenes.push_back(gen_scene(rng, spec));
        if (exclusion.count(scenes.back().id())) excluded = true;
      }
      if (excluded) continue;
      try {
        TaskExample e = render_task(scenes, f, rng);
        ds.examples.push_back(std::move(e));
        for (const Scene& sc : scenes)
          if (seen.insert(sc.id()).second) ds.scene_ids.push_back(sc.id());
        done = true;
      } catch (const DataError&) {
        // family preconditions unsatisfiable for these scenes; resample
      }
    }
    if (!done)
      throw DataError("build_dataset(" + to_string(f) +
                      "): retry budget exhausted; the exclusion set leaves too few fresh "
                      "scenes or the family is unsatisfiable under this scene spec");
  }
  return ds;
}

void save_dataset(const FamilyDataset& ds, const std::string& dir) {
  std::filesystem::create_directories(dir);
  save_examples(dir + "/" + ds.name + ".records", ds.examples);
  nlohmann::json m;
  m["name"] = ds.name;
  m["family"] = to_string(ds.family);
  m["seed"] = ds.seed;
  m["vocab_hash"] = ds.vocab_hash;
  m["example_count"] = ds.examples.size();
  m["scene_ids"] = ds.scene_ids;
  std::ofstream out(dir + "/" + ds.name + ".manifest.json");
  if (!out) throw IoError("cannot write manifest in " + dir);
  out << m.dump(2) << "\n";
}

FamilyDataset load_dataset(const std::string& dir, const std::string& name) {
  std::string mpath = dir + "/" + name + ".manifest.json";
  std::ifstream in(mpath);
  if (!in) throw IoError("missing dataset manifest " + mpath);
  nlohmann::json m = nlohmann::json::parse(in);
  FamilyDataset ds;
  ds.name = m.at("name").get<std::string>();
  ds.family = family_from_string(m.at("family").get<std::string>());
  ds.seed = m.at("seed").get<uint64_t>();
  ds.vocab_hash = m.at("vocab_hash").get<uint64_t>();
  ds.scene_ids = m.at("scene_ids").get<std::vector<uint64_t>>();
  ds.examples = load_examples(dir + "/" + name + ".records");
  if (ds.examples.size() != m.at("example_count").get<size_t>())
    throw IoError("dataset " + name + ": record count does not match manifest");
  return ds;
}

std::vector<std::string> canonical_corpus() {
  std::vector<std::string> corpus;
  std::string colors, shapes, plurals;
  for (int c = 0; c < kNumColors; ++c) colors += color_name(static_cast<Color>(c)) + " ";
  for (int sh = 0; sh < kNumShapes; ++sh) {
    shapes += shape_name(static_cast<Shape>(sh)) + " ";
    plurals += shape_plural(static_cast<Shape>(sh)) + " ";
  }
  corpus.push_back(colors);
  corpus.push_back(shapes);
  corpus.push_back(plurals);
  corpus.push_back("small large");
  std::string numbers;
  for (int n = 0; n <= 20; ++n) numbers += spell_number(n) + " ";
  corpus.push_back(numbers);
  corpus.push_back("yes no true false neutral nothing");
  corpus.push_back("what color is the circle");
  corpus.push_back("what shape is the red object");
  corpus.push_back("how many red objects are there");
  corpus.push_back("how many circles are there");
  corpus.push_back("how many objects are there");
  corpus.push_back("there is a red circle");
  corpus.push_back("the circle is red");
  corpus.push_back("the left image has more circles than the right image");
  corpus.push_back("the right image has exactly two squares");
  corpus.push_back("what color is the small star");
  corpus.push_back("what shape is in the top left");
  corpus.push_back("what color is the circle in the bottom left");
  corpus.push_back("is there a triangle in the same row as the blue object");
  corpus.push_back("caption the image");
  corpus.push_back("a small red circle and a large blue square");
  corpus.push_back("describe the bottom right region");
  corpus.push_back("is this a green triangle");
  corpus.push_back("is this a square");
  corpus.push_back("is this a yellow object");
  corpus.push_back("name every object in the image");
  return corpus;
}

bool scene_sets_disjoint(const FamilyDataset& a, const FamilyDataset& b) {
  auto sa = a.scene_id_set();
  for (uint64_t id : b.scene_ids)
    if (sa.count(id)) return false;
  return true;
}

}  // namespace vqamix
