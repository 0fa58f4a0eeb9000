// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <map>
#include <sstream>

#include "doctest.h"
#include "testutil.hpp"
#include "vqamix/pretext.hpp"
#include "vqamix/vocab.hpp"

using namespace vqamix;

namespace {
CaptionPair pair_with(const std::string& caption) {
  CaptionPair p;
  p.image.h = p.image.w = 4;
  p.image.rgb.assign(4 * 4 * 3, 7);
  p.caption = caption;
  p.scene_id = 1;
  return p;
}

std::vector<std::string> words_of(const std::string& s) { return tokenize(s); }
}  // namespace

TEST_CASE("captioning task uses the fixed prompt verbatim") {
  TaskExample e = make_ic(pair_with("a red circle"));
  CHECK(e.input_text == "caption the image");
  CHECK(e.target_text == "a red circle");
  CHECK(e.tag == TaskTag::ic);

  TaskExample one = make_ic(pair_with("circle"));
  CHECK(one.target_text == "circle");

  Rng rng(4);
  SceneSpec spec;
  auto pairs = build_caption_pairs(500, 31, spec);
  for (const auto& p : pairs) CHECK(make_ic(p).input_text == "caption the image");
}

TEST_CASE("completion splits the caption by the sampled prefix fraction") {
  Rng rng(5);
  std::string ten = "w1 w2 w3 w4 w5 w6 w7 w8 w9 w10";
  for (int i = 0; i < 200; ++i) {
    CmpDraw draw;
    TaskExample e = make_cmp(pair_with(ten), rng, &draw);
    CHECK(!draw.degenerate);
    CHECK(draw.fraction >= 0.10);
    CHECK(draw.fraction < 0.40);
    int n_in = static_cast<int>(words_of(e.input_text).size());
    int n_tg = static_cast<int>(words_of(e.target_text).size());
    CHECK(n_in == draw.prefix_words);
    CHECK(n_in + n_tg == 10);
    CHECK(n_in >= 1);
    CHECK(n_tg >= 1);
    // a 10-word caption realizes fractions within the sampled band
    CHECK(n_in >= 1);
    CHECK(n_in <= 4);
    CHECK(e.input_text + " " + e.target_text == ten);
  }
}

TEST_CASE("two-word captions split 1+1; one-word captions fall back to the prompt form") {
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    TaskExample e = make_cmp(pair_with("alpha beta"), rng);
    CHECK(e.input_text == "alpha");
    CHECK(e.target_text == "beta");
  }
  CmpDraw draw;
  TaskExample d = make_cmp(pair_with("solo"), rng, &draw);
  CHECK(draw.degenerate);
  CHECK(d.input_text == "caption the image");
  CHECK(d.target_text == "solo");
  CHECK(d.tag == TaskTag::cmp);
}

TEST_CASE("cmp drawn fractions cover the 10-40 percent band") {
  Rng rng(7);
  std::vector<int> deciles(6, 0);
  for (int i = 0; i < 10000; ++i) {
    CmpDraw draw;
    make_cmp(pair_with("a b c d e f g h i j"), rng, &draw);
    int bucket = static_cast<int>((draw.fraction - 0.10) / 0.05);
    CHECK(bucket >= 0);
    CHECK(bucket < 6);
    ++deciles[static_cast<size_t>(bucket)];
  }
  for (int c : deciles) CHECK(c > 10000 / 6 / 2);  // every sub-band populated
}

TEST_CASE("mlm masks max(1, round(0.25 n)) words with sentinel targets") {
  Rng rng(8);
  TaskExample four = make_mlm(pair_with("one two three four"), rng);
  int sentinels = 0;
  for (const auto& w : words_of(four.input_text)) sentinels += (w.rfind("<sent_", 0) == 0);
  CHECK(sentinels == 1);

  TaskExample single = make_mlm(pair_with("solo"), rng);
  CHECK(single.input_text == "<sent_0>");
  CHECK(single.target_text == "<sent_0> solo");

  // masked word count for a few lengths: round-half-up of n/4, floored at 1
  std::map<int, int> expect = {{1, 1}, {2, 1}, {3, 1}, {4, 1}, {5, 1}, {6, 2}, {8, 2}, {10, 3}};
  for (auto [n, k] : expect) {
    std::string cap;
    for (int i = 0; i < n; ++i) cap += (i ? " w" : "w") + std::to_string(i);
    TaskExample e = make_mlm(pair_with(cap), rng);
    int got = 0;
    for (const auto& w : words_of(e.input_text)) got += (w.rfind("<sent_", 0) == 0);
    CHECK(got == k);
  }
}

TEST_CASE("mlm reconstruction: substituting targets back restores the caption") {
  Rng rng(9);
  for (int trial = 0; trial < 10000; ++trial) {
    int n = 1 + static_cast<int>(rng.u64() % 12);
    std::vector<std::string> words;
    std::string cap;
    for (int i = 0; i < n; ++i) {
      std::string w = "tok" + std::to_string(rng.uniform_int(0, 30));
      words.push_back(w);
      cap += (i ? " " : "") + w;
    }
    TaskExample e = make_mlm(pair_with(cap), rng);
    // parse the target into sentinel -> word
    std::map<std::string, std::string> fill;
    auto tw = words_of(e.target_text);
    for (size_t i = 0; i + 1 < tw.size(); i += 2) {
      CHECK(tw[i].rfind("<sent_", 0) == 0);
      fill[tw[i]] = tw[i + 1];
    }
    std::string rebuilt;
    for (const auto& w : words_of(e.input_text)) {
      const std::string& use = w.rfind("<sent_", 0) == 0 ? fill.at(w) : w;
      rebuilt += (rebuilt.empty() ? "" : " ") + use;
    }
    CHECK(rebuilt == cap);
  }
}

TEST_CASE("mlm full-caption target option") {
  Rng rng(10);
  TaskExample e = make_mlm(pair_with("one two three four"), rng, /*full_caption_target=*/true);
  CHECK(e.target_text == "one two three four");
}

TEST_CASE("matching task labels are sound and balanced") {
  Rng rng(11);
  std::vector<std::string> captions = {"a red circle", "a blue square", "a green star",
                                       "a small yellow triangle"};
  CaptionPool pool(captions);
  int positives = 0;
  const int N = 10000;
  for (int i = 0; i < N; ++i) {
    CaptionPair p = pair_with(captions[static_cast<size_t>(i) % captions.size()]);
    TaskExample e = make_itm(p, pool, rng);
    if (e.target_text == "true") {
      CHECK(e.input_text == p.caption);
      ++positives;
    } else {
      CHECK(e.target_text == "false");
      CHECK(e.input_text != p.caption);
    }
  }
  double frac = static_cast<double>(positives) / N;
  CHECK(frac >= 0.48);
  CHECK(frac <= 0.52);
}

TEST_CASE("matching with a pool of one caption cannot make negatives") {
  Rng rng(12);
  CaptionPool pool({std::string("only caption")});
  CaptionPair p = pair_with("only caption");
  bool threw = false;
  for (int i = 0; i < 64 && !threw; ++i) {
    try {
      make_itm(p, pool, rng);
    } catch (const DataError&) {
      threw = true;
    }
  }
  CHECK(threw);
}

TEST_CASE("pretrain mixture draws uniformly over the enabled tasks") {
  SceneSpec spec;
  auto pairs = build_caption_pairs(40000, 21, spec);
  Rng rng(22);
  auto out = make_pretrain_mixture(pairs, PretrainTaskSet{}, rng);
  std::map<TaskTag, long> counts;
  for (const auto& e : out) ++counts[e.tag];
  double expected = 10000.0;
  double sigma = std::sqrt(40000.0 * 0.25 * 0.75);
  for (TaskTag t : {TaskTag::ic, TaskTag::cmp, TaskTag::mlm, TaskTag::itm})
    CHECK(std::abs(static_cast<double>(counts[t]) - expected) < 3 * sigma);

  Rng rng2(23);
  auto itm_only = make_pretrain_mixture(pairs, PretrainTaskSet::only(TaskTag::itm), rng2);
  for (const auto& e : itm_only) CHECK(e.tag == TaskTag::itm);

  Rng rng3(24);
  PretrainTaskSet no_mlm;
  no_mlm.mlm = false;
  auto without = make_pretrain_mixture(pairs, no_mlm, rng3);
  for (const auto& e : without) CHECK(e.input_text.find("<sent_") == std::string::npos);

  PretrainTaskSet none{false, false, false, false};
  Rng rng4(25);
  CHECK_THROWS_AS(make_pretrain_mixture(pairs, none, rng4), ConfigError);
}

TEST_CASE("generators are pure functions of (pair, rng state, pool)") {
  SceneSpec spec;
  auto pairs = build_caption_pairs(200, 55, spec);
  Rng a(77), b(77);
  auto out_a = make_pretrain_mixture(pairs, PretrainTaskSet{}, a);
  auto out_b = make_pretrain_mixture(pairs, PretrainTaskSet{}, b);
  CHECK(out_a == out_b);
}
