// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <fstream>
#include <set>

#include "doctest.h"
#include "testutil.hpp"
#include "vqamix/families.hpp"
#include "vqamix/pretext.hpp"
#include "vqamix/vocab.hpp"

using namespace vqamix;

namespace {
Scene scene_with(std::vector<SceneObject> objs, int rows = 4, int cols = 4) {
  Scene s;
  s.grid_rows = rows;
  s.grid_cols = cols;
  s.objects = std::move(objs);
  std::sort(s.objects.begin(), s.objects.end(), [](const auto& a, const auto& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  s.raster = render_scene_raster(rows, cols, s.objects, 32, 32);
  return s;
}
}  // namespace

TEST_CASE("gen_scene honors spec bounds and is deterministic") {
  SceneSpec spec;
  spec.grid_rows = spec.grid_cols = 2;
  spec.min_objects = spec.max_objects = 1;
  spec.image_h = spec.image_w = 32;
  Rng r1(42), r2(42);
  Scene a = gen_scene(r1, spec);
  Scene b = gen_scene(r2, spec);
  CHECK(a.objects.size() == 1);
  CHECK(a.objects == b.objects);
  CHECK(a.raster == b.raster);
  CHECK(a.id() == b.id());

  SceneSpec bad = spec;
  bad.min_objects = bad.max_objects = 5;  // 2x2 grid has 4 cells
  Rng r3(1);
  CHECK_THROWS_AS(gen_scene(r3, bad), ConfigError);
}

TEST_CASE("raster is a pure function of the object list") {
  Rng rng(7);
  SceneSpec spec;
  for (int i = 0; i < 20; ++i) {
    Scene s = gen_scene(rng, spec);
    Image re = render_scene_raster(s.grid_rows, s.grid_cols, s.objects, 32, 32);
    CHECK(re == s.raster);
  }
}

TEST_CASE("distinct object cells and color balance over many scenes") {
  Rng rng(13);
  SceneSpec spec;
  std::array<long, kNumColors> color_count{};
  long total = 0;
  for (int i = 0; i < 10000; ++i) {
    Scene s = gen_scene(rng, spec);
    std::set<std::pair<int, int>> cells;
    for (const auto& o : s.objects) {
      CHECK(cells.insert({o.row, o.col}).second);  // at most one object per cell
      ++color_count[static_cast<size_t>(o.color)];
      ++total;
    }
  }
  double p = 1.0 / kNumColors;
  double sigma = std::sqrt(p * (1 - p) * static_cast<double>(total));
  for (long c : color_count)
    CHECK(std::abs(static_cast<double>(c) - p * static_cast<double>(total)) < 3 * sigma + 1);
}

TEST_CASE("vqa_attr oracle reads off unique attributes") {
  Scene s = scene_with({{Shape::circle, Color::red, ObjSize::small, 0, 0},
                        {Shape::square, Color::blue, ObjSize::large, 1, 2}});
  CHECK(family_oracle({s}, Family::vqa_attr, "what color is the square") == "blue");
  CHECK(family_oracle({s}, Family::vqa_attr, "what shape is the red object") == "circle");
}

TEST_CASE("entailment oracle distinguishes true, false and neutral") {
  // a scene with green and triangle occurring on other objects, but no green triangle
  Scene s = scene_with({{Shape::triangle, Color::red, ObjSize::small, 0, 0},
                        {Shape::circle, Color::green, ObjSize::large, 2, 1}});
  CHECK(family_oracle({s}, Family::entail, "there is a green triangle") == "false");
  CHECK(family_oracle({s}, Family::entail, "there is a red triangle") == "true");
  CHECK(family_oracle({s}, Family::entail, "the triangle is red") == "true");
  CHECK(family_oracle({s}, Family::entail, "the triangle is blue") == "false");
  // no square anywhere: definite statements about it are underivable
  CHECK(family_oracle({s}, Family::entail, "the square is red") == "neutral");
}

TEST_CASE("detect_text lists every instance in row-major order") {
  Scene s = scene_with({{Shape::circle, Color::red, ObjSize::small, 0, 1},
                        {Shape::circle, Color::blue, ObjSize::small, 0, 3},
                        {Shape::circle, Color::green, ObjSize::large, 2, 0},
                        {Shape::star, Color::yellow, ObjSize::small, 3, 3}});
  CHECK(family_oracle({s}, Family::detect_text, "name every object in the image") ==
        "circle circle circle star");
}

TEST_CASE("nlvr oracle compares counts across the two scenes") {
  Scene left = scene_with({{Shape::circle, Color::red, ObjSize::small, 0, 0},
                           {Shape::circle, Color::blue, ObjSize::small, 1, 1}});
  Scene right = scene_with({{Shape::circle, Color::green, ObjSize::large, 0, 0}});
  CHECK(family_oracle({left, right}, Family::nlvr_pair,
                      "the left image has more circles than the right image") == "true");
  CHECK(family_oracle({left, right}, Family::nlvr_pair,
                      "the right image has more circles than the left image") == "false");
  CHECK(family_oracle({left, right}, Family::nlvr_pair,
                      "the right image has exactly one circles") == "true");
}

TEST_CASE("oracle soundness on freshly generated scenes") {
  Rng rng(77);
  SceneSpec spec;
  for (int fi = 0; fi < kNumFamilies; ++fi) {
    Family f = static_cast<Family>(fi);
    SceneSpec fam_spec = scene_spec_for(f, spec);
    int done = 0, attempts = 0;
    while (done < 40 && attempts < 4000) {
      ++attempts;
      std::vector<Scene> scenes;
      for (int k = 0; k < scenes_needed(f); ++k) scenes.push_back(gen_scene(rng, fam_spec));
      try {
        TaskExample e = render_task(scenes, f, rng);
        CHECK(family_oracle(scenes, f, e.input_text) == e.target_text);
        CHECK(!e.target_text.empty());
        ++done;
      } catch (const DataError&) {
      }
    }
    CHECK(done == 40);
  }
}

TEST_CASE("build_dataset determinism and exclusion") {
  SceneSpec spec;
  FamilyDataset a = build_dataset(Family::vqa_attr, 50, 99, spec);
  FamilyDataset b = build_dataset(Family::vqa_attr, 50, 99, spec);
  CHECK(a.examples == b.examples);
  CHECK(a.scene_ids == b.scene_ids);

  FamilyDataset c = build_dataset(Family::vqa_attr, 50, 123, spec, a.scene_id_set());
  CHECK(scene_sets_disjoint(a, c));
}

TEST_CASE("exclusion that forbids every scene errors out") {
  SceneSpec tiny;
  tiny.grid_rows = tiny.grid_cols = 2;
  tiny.min_objects = tiny.max_objects = 1;
  tiny.image_h = tiny.image_w = 8;
  // enumerate the entire scene space: 4 cells x 4 shapes x 6 colors x 2 sizes
  std::unordered_set<uint64_t> all;
  for (int cell = 0; cell < 4; ++cell)
    for (int sh = 0; sh < kNumShapes; ++sh)
      for (int c = 0; c < kNumColors; ++c)
        for (int sz = 0; sz < 2; ++sz) {
          Scene s;
          s.grid_rows = s.grid_cols = 2;
          s.objects = {{static_cast<Shape>(sh), static_cast<Color>(c),
                        static_cast<ObjSize>(sz), cell / 2, cell % 2}};
          all.insert(s.id());
        }
  CHECK_THROWS_AS(build_dataset(Family::detect_text, 5, 7, tiny, all), DataError);
}

TEST_CASE("dataset files round-trip byte-identically") {
  testutil::TempDir tmp("ds");
  SceneSpec spec;
  FamilyDataset ds = build_dataset(Family::count, 25, 404, spec);
  ds.vocab_hash = 12345;
  save_dataset(ds, tmp.str());
  FamilyDataset back = load_dataset(tmp.str(), ds.name);
  CHECK(back.examples == ds.examples);
  CHECK(back.scene_ids == ds.scene_ids);
  CHECK(back.vocab_hash == ds.vocab_hash);
  CHECK(back.family == ds.family);

  // writing again produces identical bytes
  testutil::TempDir tmp2("ds2");
  save_dataset(ds, tmp2.str());
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(slurp(tmp.str() + "/count.records") == slurp(tmp2.str() + "/count.records"));
}

TEST_CASE("answer grammar closure: every target tokenizes without UNK") {
  Vocab vocab = Vocab::build(canonical_corpus(), 512);
  SceneSpec spec;
  for (int fi = 0; fi < kNumFamilies; ++fi) {
    Family f = static_cast<Family>(fi);
    FamilyDataset ds = build_dataset(f, 40, 2000 + static_cast<uint64_t>(fi), spec);
    for (const TaskExample& e : ds.examples) {
      for (int id : encode(e.target_text, vocab, false)) CHECK(id != Vocab::kUnk);
      for (int id : encode(e.input_text, vocab, false)) CHECK(id != Vocab::kUnk);
    }
  }
}

TEST_CASE("caption pairs carry scene provenance") {
  SceneSpec spec;
  auto pairs = build_caption_pairs(30, 66, spec);
  CHECK(pairs.size() == 30);
  for (const auto& p : pairs) {
    CHECK(!p.caption.empty());
    CHECK(p.scene_id != 0);
    CHECK(p.image.h == 32);
  }
}
