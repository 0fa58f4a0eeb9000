// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Run with --list to see criteria, --only <name> for one of them.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "../testutil.hpp"
#include "vqamix/checkpoint.hpp"
#include "vqamix/cli.hpp"
#include "vqamix/pretext.hpp"
#include "vqamix/protocols.hpp"
#include "vqamix/runconfig.hpp"

using namespace vqamix;
using testutil::check_gradients;
using testutil::random_tensor;

namespace {

struct Check {
  std::string name;
  double budget_sec;
  std::function<bool(std::string&)> run;
};

std::string g_workdir;

ModelConfig default_toy_config(int vocab_size) {
  ModelConfig c;  // the documented default: d=128, 2/2/2 layers, 4 heads, 32x32, HxW=4x4
  c.vocab_size = vocab_size;
  return c;
}

ModelConfig small_config(int vocab_size) {
  ModelConfig c;
  c.d_model = 64;
  c.vocab_size = vocab_size;
  return c;
}

Vocab run_vocab() { return Vocab::build(canonical_corpus(), 512); }

bool expect(bool cond, const std::string& what, std::string& detail) {
  if (!cond) {
    if (!detail.empty()) detail += "; ";
    detail += "FAILED: " + what;
  }
  return cond;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. gradient suite
// ---------------------------------------------------------------------------

bool crit_gradients(std::string& detail) {
  bool ok = true;
  Rng rng(1001);

  {  // per-kernel checks at 1e-4
    Parameter a("a", random_tensor({4, 5}, rng));
    Parameter b("b", random_tensor({5, 3}, rng));
    Parameter c("c", random_tensor({4, 5}, rng));
    Parameter row("row", random_tensor({5}, rng));
    Parameter gain("gain", random_tensor({5}, rng));
    Parameter bias("bias", random_tensor({5}, rng));
    Parameter table("table", random_tensor({7, 4}, rng));
    Parameter img("img", random_tensor({6, 6, 2}, rng));
    Parameter kern("kern", random_tensor({3, 3, 2, 3}, rng, -0.5, 0.5));
    Parameter cb("cb", random_tensor({3}, rng));
    Parameter logits("logits", random_tensor({4, 6}, rng));

    struct KernelCase {
      const char* name;
      std::vector<Parameter*> params;
      std::function<Var(Graph&)> build;
    };
    IntMat buckets(4, 4);
    for (int r = 0; r < 4; ++r)
      for (int cix = 0; cix < 4; ++cix) buckets.at(r, cix) = (r * 3 + cix) % 7;
    std::vector<int> ids = {0, 2, 2, 4};
    std::vector<int> targets = {1, 0, -1, 5};
    std::vector<KernelCase> cases = {
        {"matmul", {&a, &b}, [&](Graph& g) { return sum(matmul(g.param(a), g.param(b))); }},
        {"add_mul_scale",
         {&a, &c},
         [&](Graph& g) { return sum(scale(mul(add(g.param(a), g.param(c)), g.param(a)), 0.3)); }},
        {"add_rowvec", {&a, &row},
         [&](Graph& g) { return sum(mul(add_rowvec(g.param(a), g.param(row)),
                                        add_rowvec(g.param(a), g.param(row)))); }},
        {"gelu", {&a}, [&](Graph& g) { return sum(gelu(g.param(a))); }},
        {"transpose_reshape_slice_concat", {&a, &c},
         [&](Graph& g) {
           Var t = reshape(transpose(g.param(a)), {4, 5});
           Var s = concat_cols({slice_cols(t, 0, 2), slice_cols(g.param(c), 1, 3)});
           return sum(mul(concat_rows({s, s}), concat_rows({s, s})));
         }},
        {"softmax_rows", {&a},
         [&](Graph& g) { return sum(mul(softmax_rows(g.param(a)), g.param(c))); }},
        {"layernorm", {&a, &gain, &bias},
         [&](Graph& g) {
           Var y = layernorm(g.param(a), g.param(gain), g.param(bias), 1e-5);
           return sum(mul(y, y));
         }},
        {"embed_rows", {&table},
         [&](Graph& g) {
           Var e = embed_rows(g.param(table), ids);
           return sum(mul(e, e));
         }},
        {"rel_bias", {&table},
         [&](Graph& g) {
           Var e = rel_bias(g.param(table), buckets, 2);
           return sum(mul(e, e));
         }},
        {"conv2d", {&img, &kern, &cb},
         [&](Graph& g) {
           Var y = conv2d(g.param(img), g.param(kern), g.param(cb), 2, 1);
           return sum(mul(y, y));
         }},
        {"softmax_cross_entropy", {&logits},
         [&](Graph& g) { return softmax_cross_entropy(g.param(logits), targets, -1); }},
    };
    for (const auto& kc : cases) {
      auto res = check_gradients(kc.params, kc.build, 1e-4);
      ok &= expect(res.ok(), std::string("kernel ") + kc.name + ": " + res.first_failure,
                   detail);
    }
  }

  {  // end-to-end, default toy config, >= 200 sampled coordinates at 1e-3
    Vocab vocab = run_vocab();
    Model m(default_toy_config(vocab.size()), 2002);
    SceneSpec scene;
    FamilyDataset batch_src = build_dataset(Family::vqa_attr, 2, 77, scene);
    auto build = [&](Graph& g) { return m.forward_loss(g, batch_src.examples, vocab); };
    int n_params = static_cast<int>(m.parameters().size());
    int per = std::max(1, (200 + n_params - 1) / n_params);
    auto res = check_gradients(m.parameters(), build, 1e-3, per, 4242);
    ok &= expect(res.checked >= 200, "sampled " + std::to_string(res.checked) + " < 200", detail);
    ok &= expect(res.ok(), "end-to-end: " + res.first_failure +
                               " (worst rel " + fmt(res.worst_rel) + ")",
                 detail);
    detail += " e2e coords=" + std::to_string(res.checked) +
              " worst_rel=" + fmt(res.worst_rel);
  }
  return ok;
}

// ---------------------------------------------------------------------------
// 2. pretraining-task generator properties (10k draws)
// ---------------------------------------------------------------------------

bool crit_generators(std::string& detail) {
  bool ok = true;
  Rng rng(3003);
  auto caption_of = [&](int n) {
    std::string cap;
    for (int i = 0; i < n; ++i) cap += (i ? " w" : "w") + std::to_string(i);
    return cap;
  };
  CaptionPair pair;
  pair.image.h = pair.image.w = 4;
  pair.image.rgb.assign(48, 3);

  // CMP: sampled fractions stay inside [0.10, 0.40] and the split reconstructs
  for (int i = 0; i < 10000; ++i) {
    pair.caption = caption_of(2 + static_cast<int>(rng.u64() % 12));
    CmpDraw draw;
    TaskExample e = make_cmp(pair, rng, &draw);
    ok &= expect(draw.fraction >= 0.10 && draw.fraction <= 0.40,
                 "cmp fraction " + fmt(draw.fraction), detail);
    ok &= expect(e.input_text + " " + e.target_text == pair.caption, "cmp reconstruction",
                 detail);
    if (!ok) break;
  }

  // MLM: mask count and exact reconstruction
  for (int i = 0; i < 10000 && ok; ++i) {
    int n = 1 + static_cast<int>(rng.u64() % 14);
    pair.caption = caption_of(n);
    TaskExample e = make_mlm(pair, rng);
    int expect_k = std::max(1, static_cast<int>(std::floor(0.25 * n + 0.5)));
    auto in_words = tokenize(e.input_text);
    auto tgt_words = tokenize(e.target_text);
    int masked = 0;
    for (const auto& w : in_words) masked += (w.rfind("<sent_", 0) == 0);
    ok &= expect(masked == expect_k,
                 "mlm mask count " + std::to_string(masked) + " != " + std::to_string(expect_k),
                 detail);
    std::map<std::string, std::string> fill;
    for (size_t k = 0; k + 1 < tgt_words.size(); k += 2) fill[tgt_words[k]] = tgt_words[k + 1];
    std::string rebuilt;
    for (const auto& w : in_words) {
      const std::string& use = w.rfind("<sent_", 0) == 0 ? fill.at(w) : w;
      rebuilt += (rebuilt.empty() ? "" : " ") + use;
    }
    ok &= expect(rebuilt == pair.caption, "mlm reconstruction", detail);
  }

  // ITM: positive rate and label soundness
  std::vector<std::string> captions;
  for (int i = 0; i < 50; ++i) captions.push_back(caption_of(3 + i % 5) + " c" + std::to_string(i));
  CaptionPool pool(captions);
  int pos = 0;
  for (int i = 0; i < 10000 && ok; ++i) {
    pair.caption = captions[static_cast<size_t>(i % 50)];
    TaskExample e = make_itm(pair, pool, rng);
    bool is_match = (e.input_text == pair.caption);
    ok &= expect(e.target_text == (is_match ? "true" : "false"), "itm label soundness", detail);
    pos += is_match;
  }
  double frac = pos / 10000.0;
  ok &= expect(frac >= 0.48 && frac <= 0.52, "itm positive rate " + fmt(frac), detail);
  detail += " itm_pos=" + fmt(frac);
  return ok;
}

// ---------------------------------------------------------------------------
// 3. equal-share mixture
// ---------------------------------------------------------------------------

bool crit_equal_share(std::string& detail) {
  bool ok = true;
  SceneSpec scene;
  std::vector<FamilyDataset> ds;
  std::vector<Family> fams = {Family::vqa_attr, Family::count,      Family::entail,
                              Family::caption,  Family::region_desc, Family::match_yesno,
                              Family::detect_text, Family::compositional};
  std::vector<int> sizes = {97, 311, 64, 128, 51, 200, 83, 149};  // deliberately unequal
  for (size_t i = 0; i < fams.size(); ++i)
    ds.push_back(build_dataset(fams[i], sizes[i], 9000 + static_cast<uint64_t>(i), scene));

  for (int n : {1, 2, 4, 8}) {
    MixtureSpec spec;
    for (int i = 0; i < n; ++i)
      spec.members.push_back({ds[static_cast<size_t>(i)].name, &ds[static_cast<size_t>(i)]});
    spec.batch_size = 16 * n;
    spec.seed = 31;
    BatchComposer comp(spec);
    for (int b = 0; b < 1000 && ok; ++b) {
      auto batch = comp.next();
      ok &= expect(static_cast<int>(batch.size()) == 16 * n, "batch size", detail);
      std::map<TaskTag, int> per;
      for (const TaskExample* e : batch) ++per[e->tag];
      for (int i = 0; i < n; ++i)
        ok &= expect(per[tag_of(ds[static_cast<size_t>(i)].family)] == 16,
                     "N=" + std::to_string(n) + " batch " + std::to_string(b) + " share", detail);
    }
    for (const auto& [name, cnt] : comp.counts())
      ok &= expect(cnt == 16000L, "total contribution of " + name, detail);
  }
  return ok;
}

// ---------------------------------------------------------------------------
// 4. training sanity
// ---------------------------------------------------------------------------

bool crit_training_sanity(std::string& detail) {
  bool ok = true;
  Vocab vocab = run_vocab();
  ModelConfig cfg = default_toy_config(vocab.size());
  SceneSpec scene;

  {  // untrained loss near ln |V|
    Model m(cfg, 404);
    FamilyDataset probe = build_dataset(Family::vqa_attr, 8, 505, scene);
    Graph g;
    double loss = m.forward_loss(g, probe.examples, vocab).value().item();
    double lnv = std::log(static_cast<double>(vocab.size()));
    ok &= expect(std::abs(loss - lnv) < 0.5,
                 "untrained loss " + fmt(loss) + " vs ln|V| " + fmt(lnv), detail);
    detail += " untrained=" + fmt(loss) + " lnV=" + fmt(lnv);
  }

  {  // overfit one batch to < 0.05 within 500 steps
    Model m(cfg, 606);
    FamilyDataset one_batch = build_dataset(Family::vqa_attr, 16, 707, scene);
    MixtureSpec spec;
    spec.members = {{one_batch.name, &one_batch}};
    spec.batch_size = 16;
    spec.steps = 500;
    spec.seed = 17;
    Optimizer opt({OptKind::adam, 1e-3}, m.parameters());
    TrainOptions topt;
    BatchComposer probe_comp(spec);
    TrainRunRecord rec;
    bool reached = false;
    int reached_at = 0;
    {
      // train manually so we can stop at the criterion threshold
      BatchComposer comp(spec);
      for (int s = 1; s <= spec.steps; ++s) {
        auto batch = comp.next();
        Graph g;
        Var loss = m.forward_loss(g, batch, vocab);
        double lv = loss.value().item();
        rec.loss_curve.push_back(lv);
        if (lv < 0.05) {
          reached = true;
          reached_at = s;
          break;
        }
        g.backward(loss);
        opt.step();
        opt.zero_grad();
      }
    }
    ok &= expect(reached, "overfit loss " + fmt(rec.loss_curve.back()) + " after 500 steps",
                 detail);
    if (reached) detail += " overfit_steps=" + std::to_string(reached_at);
  }

  {  // deterministic loss curves
    FamilyDataset a = build_dataset(Family::count, 64, 808, scene);
    auto run = [&]() {
      Model m(cfg, 909);
      MixtureSpec spec;
      spec.members = {{a.name, &a}};
      spec.batch_size = 16;
      spec.steps = 25;
      spec.seed = 19;
      Optimizer opt({OptKind::adam, 1e-3}, m.parameters());
      TrainOptions topt;
      return train(m, opt, vocab, spec, topt).loss_curve;
    };
    auto c1 = run();
    auto c2 = run();
    ok &= expect(c1 == c2, "loss curves differ across identical runs", detail);
  }
  return ok;
}

// ---------------------------------------------------------------------------
// 5-9. protocol table analogues
// ---------------------------------------------------------------------------

ProtocolConfig protocol_base(const Vocab& vocab, bool default_model) {
  ProtocolConfig cfg;
  cfg.model = default_model ? default_toy_config(vocab.size()) : small_config(vocab.size());
  return cfg;
}

bool crit_zero_shot(std::string& detail) {
  Vocab vocab = run_vocab();
  ProtocolConfig cfg = protocol_base(vocab, /*default_model=*/true);
  MetricReport r = run_zero_shot(cfg, vocab, g_workdir + "/zero_shot");
  double ref = r.rows.at("pretrained_only").at("accuracy_median");
  double m4 = r.rows.at("mixture_4").at("accuracy_median");
  double m8 = r.rows.at("mixture_8").at("accuracy_median");
  detail = "pretrained=" + fmt(ref) + " mix4=" + fmt(m4) + " mix8=" + fmt(m8);
  bool ok = true;
  ok &= expect(ref < m4, "pretrained-only reference < mixture_4", detail);
  ok &= expect(m4 <= m8, "mixture_4 <= mixture_8", detail);
  ok &= expect(m8 - ref >= 0.05, "mixture_8 at least 5 points over the reference", detail);
  return ok;
}

bool crit_forgetting(std::string& detail) {
  Vocab vocab = run_vocab();
  ProtocolConfig cfg = protocol_base(vocab, /*default_model=*/false);
  MetricReport r = run_forgetting(cfg, vocab, g_workdir + "/forgetting");
  double pre = r.rows.at("mixture").at("probe_accuracy_median");
  double post = r.rows.at("finetuned").at("probe_accuracy_median");
  double new_pre = r.rows.at("mixture").at("new_accuracy_median");
  double new_post = r.rows.at("finetuned").at("new_accuracy_median");
  double sp = r.rows.at("single_probe").at("probe_accuracy_median");
  double sn = r.rows.at("single_new").at("new_accuracy_median");
  double ap = r.rows.at("all_mixture").at("probe_accuracy_median");
  double an = r.rows.at("all_mixture").at("new_accuracy_median");
  detail = "probe " + fmt(pre) + "->" + fmt(post) + ", new " + fmt(new_pre) + "->" +
           fmt(new_post) + ", single probe/new " + fmt(sp) + "/" + fmt(sn) + ", allmix " +
           fmt(ap) + "/" + fmt(an);
  bool ok = true;
  ok &= expect(pre - post >= 0.10, "probe accuracy drops by >= 10 points", detail);
  ok &= expect(new_post >= new_pre, "finetune family improves", detail);
  ok &= expect(sp - ap <= 0.05, "all-mixture within 5 points of single probe run", detail);
  ok &= expect(sn - an <= 0.05, "all-mixture within 5 points of single new run", detail);
  return ok;
}

bool crit_pretrain_ablation(std::string& detail) {
  Vocab vocab = run_vocab();
  ProtocolConfig cfg = protocol_base(vocab, /*default_model=*/false);
  MetricReport r = run_pretrain_ablation(cfg, vocab, g_workdir + "/pretrain_ablation");
  bool ok = expect(r.rows.size() == 5, "report holds all five configurations", detail);
  for (Family f : cfg.downstream) {
    std::string metric = "acc_" + to_string(f) + "_median";
    double all4 = r.rows.at("all4").at(metric);
    detail += " " + to_string(f) + ": all4=" + fmt(all4) + " vs";
    for (const char* arm : {"ic", "cmp", "itm", "mlm"}) {
      double v = r.rows.at(arm).at(metric);
      detail += " " + std::string(arm) + "=" + fmt(v);
      ok &= expect(all4 >= v, std::string("all4 >= ") + arm + " on " + to_string(f), detail);
    }
  }
  return ok;
}

bool crit_fusion_ablation(std::string& detail) {
  Vocab vocab = run_vocab();
  ProtocolConfig cfg = protocol_base(vocab, /*default_model=*/false);
  MetricReport r = run_fusion_ablation(cfg, vocab, g_workdir + "/fusion_ablation");
  long pc = r.integers.at("params_concat_encoder");
  long pe = r.integers.at("params_encoder_decoder");
  detail = "params " + std::to_string(pc) + " vs " + std::to_string(pe);
  bool ok = expect(pe > pc, "encoder_decoder has strictly more parameters", detail);
  for (Family f : cfg.fusion_families) {
    double base = r.baselines.at("majority_" + to_string(f));
    for (const char* row : {"concat_encoder", "encoder_decoder"}) {
      double acc = r.rows.at(row).at("acc_" + to_string(f));
      detail += " " + std::string(row) + "/" + to_string(f) + "=" + fmt(acc) + "(base " +
                fmt(base) + ")";
      ok &= expect(acc > base, std::string(row) + " above baseline on " + to_string(f), detail);
    }
  }
  return ok;
}

bool crit_detect(std::string& detail) {
  bool ok = true;
  {  // the hand multiset oracle cases must hold exactly
    Prf a = detection_f1("circle circle circle star", {"circle", "circle", "circle", "star"});
    ok &= expect(a.precision == 1.0 && a.recall == 1.0 && a.f1 == 1.0, "multiset exact case",
                 detail);
    Prf b = detection_f1("circle dog dog", {"circle", "circle", "dog"});
    ok &= expect(std::abs(b.precision - 2.0 / 3.0) < 1e-12 &&
                     std::abs(b.recall - 2.0 / 3.0) < 1e-12 &&
                     std::abs(b.f1 - 2.0 / 3.0) < 1e-12,
                 "multiset partial case", detail);
    Prf c = detection_f1("", {"circle"});
    ok &= expect(c.precision == 0.0 && c.recall == 0.0 && c.f1 == 0.0, "empty prediction case",
                 detail);
  }
  Vocab vocab = run_vocab();
  ProtocolConfig cfg = protocol_base(vocab, /*default_model=*/false);
  MetricReport r = run_detect_eval(cfg, vocab, g_workdir + "/detect_eval");
  double scratch = r.rows.at("detect_from_scratch").at("f1");
  double mixed = r.rows.at("mixture_plus_detect").at("f1");
  double zs = r.rows.at("zero_shot_mixture").at("f1");
  detail += " scratch=" + fmt(scratch) + " mixture=" + fmt(mixed) + " zs=" + fmt(zs);
  ok &= expect(mixed >= scratch, "mixture+detect F1 >= detect-only-from-scratch F1", detail);
  ok &= expect(zs > 0.0, "zero-shot F1 > 0 with region descriptions in the mixture", detail);
  for (const auto& [row, metrics] : r.rows)
    for (const auto& [name, v] : metrics)
      ok &= expect(v >= 0.0 && v <= 1.0, row + "/" + name + " within [0,1]", detail);
  return ok;
}

// ---------------------------------------------------------------------------
// 10. reproducibility: regenerate a report from its stored config and seed
// ---------------------------------------------------------------------------

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("missing " + p);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

bool crit_reproducibility(std::string& detail) {
  Vocab vocab = run_vocab();
  ProtocolConfig cfg = protocol_base(vocab, /*default_model=*/false);
  cfg.train_examples = 120;
  cfg.eval_examples = 60;
  cfg.steps_mixture = 60;
  cfg.seeds = {5};
  std::string dir_a = g_workdir + "/repro_a";
  std::string dir_b = g_workdir + "/repro_b";
  run_fusion_ablation(cfg, vocab, dir_a);

  // regenerate strictly from the stored configuration document
  nlohmann::json stored = nlohmann::json::parse(slurp(dir_a + "/config.json"));
  ProtocolConfig reloaded = stored.get<ProtocolConfig>();
  run_fusion_ablation(reloaded, vocab, dir_b);

  bool ok = true;
  ok &= expect(slurp(dir_a + "/report.json") == slurp(dir_b + "/report.json"),
               "report.json bitwise identical", detail);
  for (const auto& entry : std::filesystem::directory_iterator(dir_a + "/preds"))
    ok &= expect(slurp(entry.path().string()) ==
                     slurp(dir_b + "/preds/" + entry.path().filename().string()),
                 "prediction dump " + entry.path().filename().string(), detail);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  std::string only;
  bool list = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = argv[++i];
    else if (std::strcmp(argv[i], "--list") == 0) list = true;
    else if (std::strcmp(argv[i], "--workdir") == 0 && i + 1 < argc) g_workdir = argv[++i];
  }
  if (g_workdir.empty())
    g_workdir = (std::filesystem::temp_directory_path() / "vqamix_acceptance").string();
  std::filesystem::remove_all(g_workdir);
  std::filesystem::create_directories(g_workdir);

  std::vector<Check> checks = {
      {"gradient_suite", 300, crit_gradients},
      {"pretrain_generators", 60, crit_generators},
      {"equal_share_mixture", 60, crit_equal_share},
      {"training_sanity", 600, crit_training_sanity},
      {"zero_shot_ordering", 7200, crit_zero_shot},
      {"forgetting", 7200, crit_forgetting},
      {"pretrain_ablation", 10800, crit_pretrain_ablation},
      {"fusion_ablation", 3600, crit_fusion_ablation},
      {"detect_as_text", 3600, crit_detect},
      {"reproducibility", 3600, crit_reproducibility},
  };

  if (list) {
    for (const auto& c : checks) std::printf("%s\n", c.name.c_str());
    return 0;
  }

  int failures = 0;
  for (const auto& c : checks) {
    if (!only.empty() && c.name != only) continue;
    auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail += std::string(" exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_sec) {
      ok = false;
      detail += " exceeded runtime budget of " + std::to_string(static_cast<int>(c.budget_sec)) +
                "s";
    }
    std::printf("[%s] %-22s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", c.name.c_str(), secs,
                detail.empty() ? "" : " ", detail.c_str());
    std::fflush(stdout);
    failures += !ok;
  }
  return failures;
}
