// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#include "vqamix/protocols.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "vqamix/pretext.hpp"

namespace vqamix {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<std::string> family_names(const std::vector<Family>& fams) {
  std::vector<std::string> out;
  for (Family f : fams) out.push_back(to_string(f));
  return out;
}

std::vector<Family> families_from_names(const std::vector<std::string>& names) {
  std::vector<Family> out;
  for (const std::string& n : names) out.push_back(family_from_string(n));
  return out;
}

void check_disjoint(const FamilyDataset& train, const FamilyDataset& eval_set) {
  if (!scene_sets_disjoint(train, eval_set))
    throw DataError("protocol hygiene: train dataset '" + train.name +
                    "' shares scenes with eval dataset '" + eval_set.name + "'");
}

std::string seed_metric(const std::string& base, size_t seed_index) {
  return base + "_seed" + std::to_string(seed_index);
}

void add_median(MetricReport& r, const std::string& row, const std::string& metric,
                const std::vector<double>& per_seed) {
  for (size_t i = 0; i < per_seed.size(); ++i)
    r.rows[row][seed_metric(metric, i)] = per_seed[i];
  r.rows[row][metric + "_median"] = median(per_seed);
}

struct DumpSink {
  std::vector<std::pair<std::string, EvalResult>> dumps;
  void add(std::string name, EvalResult res) { dumps.emplace_back(std::move(name), std::move(res)); }
  void write(const std::string& out_dir) const {
    if (out_dir.empty()) return;
    std::filesystem::create_directories(out_dir + "/preds");
    for (const auto& [name, res] : dumps)
      save_predictions(out_dir + "/preds/" + name + ".tsv", res.golds, res.preds);
  }
};

uint64_t protocol_config_hash(const ProtocolConfig& cfg) {
  return fnv1a64(nlohmann::json(cfg).dump());
}

// Every protocol stores its resolved configuration so any report can be
// regenerated from (config.json, seed) alone.
void save_protocol_config(const ProtocolConfig& cfg, const std::string& out_dir) {
  if (out_dir.empty()) return;
  std::filesystem::create_directories(out_dir);
  std::ofstream out(out_dir + "/config.json");
  if (!out) throw IoError("cannot write protocol config in " + out_dir);
  out << nlohmann::json(cfg).dump(2) << "\n";
}

Optimizer fresh_optimizer(const ProtocolConfig& cfg, Model& m) {
  return Optimizer(cfg.opt, m.parameters());
}

void train_mixture(const ProtocolConfig& cfg, Model& model, const Vocab& vocab,
                   const std::vector<const FamilyDataset*>& datasets, int steps, uint64_t seed) {
  MixtureSpec spec;
  for (const FamilyDataset* d : datasets) spec.members.push_back({d->name, d});
  spec.batch_size = cfg.batch_size;
  spec.steps = steps;
  spec.seed = seed;
  Optimizer opt = fresh_optimizer(cfg, model);
  TrainOptions topt;
  topt.opt = cfg.opt;
  topt.vocab_hash = vocab.hash();
  train(model, opt, vocab, spec, topt);
}

}  // namespace

std::string to_string(ProtocolKind k) {
  switch (k) {
    case ProtocolKind::zero_shot: return "zero_shot";
    case ProtocolKind::forgetting: return "forgetting";
    case ProtocolKind::pretrain_ablation: return "pretrain_ablation";
    case ProtocolKind::fusion_ablation: return "fusion_ablation";
    case ProtocolKind::detect_eval: return "detect_eval";
  }
  throw ConfigError("bad protocol kind");
}

std::vector<std::string> protocol_names() {
  return {"zero_shot", "forgetting", "pretrain_ablation", "fusion_ablation", "detect_eval"};
}

ProtocolKind protocol_kind_from_string(const std::string& s) {
  const auto names = protocol_names();
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == s) return static_cast<ProtocolKind>(i);
  std::string msg = "unknown protocol '" + s + "'; valid protocols:";
  for (const auto& n : names) msg += " " + n;
  throw ConfigError(msg);
}

void to_json(nlohmann::json& j, const ProtocolConfig& c) {
  j["model"] = c.model;
  j["scene"] = {{"grid_rows", c.scene.grid_rows},       {"grid_cols", c.scene.grid_cols},
                {"min_objects", c.scene.min_objects},   {"max_objects", c.scene.max_objects},
                {"image_h", c.scene.image_h},           {"image_w", c.scene.image_w}};
  j["optimizer"] = {{"kind", to_string(c.opt.kind)}, {"lr", c.opt.lr},
                    {"beta1", c.opt.beta1},          {"beta2", c.opt.beta2},
                    {"epsilon", c.opt.epsilon}};
  j["batch_size"] = c.batch_size;
  j["train_examples"] = c.train_examples;
  j["eval_examples"] = c.eval_examples;
  j["pretrain_pairs"] = c.pretrain_pairs;
  j["steps_mixture"] = c.steps_mixture;
  j["steps_single"] = c.steps_single;
  j["steps_finetune"] = c.steps_finetune;
  j["steps_pretrain"] = c.steps_pretrain;
  j["steps_downstream"] = c.steps_downstream;
  j["seeds"] = c.seeds;
  j["jobs"] = c.jobs;
  j["held_out"] = to_string(c.held_out);
  j["mix4"] = family_names(c.mix4);
  j["mix8"] = family_names(c.mix8);
  j["forget_base"] = family_names(c.forget_base);
  j["forget_probe"] = to_string(c.forget_probe);
  j["forget_new"] = to_string(c.forget_new);
  j["downstream"] = family_names(c.downstream);
  j["fusion_families"] = family_names(c.fusion_families);
  j["detect_mix"] = family_names(c.detect_mix);
}

void from_json(const nlohmann::json& j, ProtocolConfig& c) {
  ProtocolConfig d;
  c.model = j.value("model", nlohmann::json(d.model)).get<ModelConfig>();
  if (j.contains("scene")) {
    const auto& s = j.at("scene");
    c.scene.grid_rows = s.value("grid_rows", d.scene.grid_rows);
    c.scene.grid_cols = s.value("grid_cols", d.scene.grid_cols);
    c.scene.min_objects = s.value("min_objects", d.scene.min_objects);
    c.scene.max_objects = s.value("max_objects", d.scene.max_objects);
    c.scene.image_h = s.value("image_h", d.scene.image_h);
    c.scene.image_w = s.value("image_w", d.scene.image_w);
  }
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    c.opt.kind = opt_kind_from_string(o.value("kind", to_string(d.opt.kind)));
    c.opt.lr = o.value("lr", d.opt.lr);
    c.opt.beta1 = o.value("beta1", d.opt.beta1);
    c.opt.beta2 = o.value("beta2", d.opt.beta2);
    c.opt.epsilon = o.value("epsilon", d.opt.epsilon);
  }
  c.batch_size = j.value("batch_size", d.batch_size);
  c.train_examples = j.value("train_examples", d.train_examples);
  c.eval_examples = j.value("eval_examples", d.eval_examples);
  c.pretrain_pairs = j.value("pretrain_pairs", d.pretrain_pairs);
  c.steps_mixture = j.value("steps_mixture", d.steps_mixture);
  c.steps_single = j.value("steps_single", d.steps_single);
  c.steps_finetune = j.value("steps_finetune", d.steps_finetune);
  c.steps_pretrain = j.value("steps_pretrain", d.steps_pretrain);
  c.steps_downstream = j.value("steps_downstream", d.steps_downstream);
  c.seeds = j.value("seeds", d.seeds);
  c.jobs = j.value("jobs", d.jobs);
  c.held_out = family_from_string(j.value("held_out", to_string(d.held_out)));
  c.mix4 = families_from_names(j.value("mix4", family_names(d.mix4)));
  c.mix8 = families_from_names(j.value("mix8", family_names(d.mix8)));
  c.forget_base = families_from_names(j.value("forget_base", family_names(d.forget_base)));
  c.forget_probe = family_from_string(j.value("forget_probe", to_string(d.forget_probe)));
  c.forget_new = family_from_string(j.value("forget_new", to_string(d.forget_new)));
  c.downstream = families_from_names(j.value("downstream", family_names(d.downstream)));
  c.fusion_families =
      families_from_names(j.value("fusion_families", family_names(d.fusion_families)));
  c.detect_mix = families_from_names(j.value("detect_mix", family_names(d.detect_mix)));
}

EvalResult evaluate_exact(const Model& model, const Vocab& vocab, const FamilyDataset& eval_set) {
  EvalResult r;
  r.golds.reserve(eval_set.examples.size());
  r.preds.reserve(eval_set.examples.size());
  for (const TaskExample& e : eval_set.examples) {
    r.golds.push_back(e.target_text);
    r.preds.push_back(model.answer(e, vocab));
  }
  r.accuracy = exact_match_accuracy(r.preds, r.golds);
  return r;
}

void run_parallel(std::vector<std::function<void()>>& jobs, int workers) {
  if (workers <= 0)
    workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<int>(workers, static_cast<int>(jobs.size()));
  if (workers <= 1) {
    for (auto& j : jobs) j();
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        try {
          jobs[i]();
        } catch (...) {
          std::lock_guard<std::mutex> lk(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

double median(std::vector<double> v) {
  if (v.empty()) throw NumericError("median of empty set");
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------
// zero-shot (mixture leave-one-out)
// ---------------------------------------------------------------------------

MetricReport run_zero_shot(const ProtocolConfig& cfg, const Vocab& vocab,
                           const std::string& out_dir) {
  auto t0 = Clock::now();
  save_protocol_config(cfg, out_dir);
  for (Family f : cfg.mix4)
    if (f == cfg.held_out) throw ConfigError("zero_shot: held-out family appears in mix4");
  for (Family f : cfg.mix8)
    if (f == cfg.held_out) throw ConfigError("zero_shot: held-out family appears in mix8");

  size_t n_seeds = cfg.seeds.size();
  std::vector<double> pretrained(n_seeds), acc4(n_seeds), acc8(n_seeds), baseline(n_seeds);
  std::vector<DumpSink> sinks(n_seeds);

  std::vector<std::function<void()>> jobs;
  for (size_t si = 0; si < n_seeds; ++si) {
    jobs.push_back([&, si] {
      uint64_t seed = cfg.seeds[si];
      FamilyDataset eval_held = build_dataset(cfg.held_out, cfg.eval_examples,
                                              derive_seed(seed, "zs-eval"), cfg.scene);
      eval_held.name = "eval_" + to_string(cfg.held_out);
      auto excl = eval_held.scene_id_set();

      std::vector<Family> all = cfg.mix8;
      for (Family f : cfg.mix4)
        if (std::find(all.begin(), all.end(), f) == all.end()) all.push_back(f);
      std::map<Family, FamilyDataset> trains;
      for (Family f : all) {
        FamilyDataset ds = build_dataset(f, cfg.train_examples,
                                         derive_seed(seed, "zs-train:" + to_string(f)),
                                         cfg.scene, excl);
        check_disjoint(ds, eval_held);
        trains.emplace(f, std::move(ds));
      }

      // all arms start from the same pretrained model; the pretrained-only
      // evaluation is the reference row
      std::vector<CaptionPair> pairs = build_caption_pairs(
          cfg.pretrain_pairs, derive_seed(seed, "zs-pairs"), cfg.scene, excl);
      Rng mix_rng(derive_seed(seed, "zs-premix"));
      FamilyDataset pre;
      pre.name = "pretrain";
      pre.family = Family::caption;
      pre.seed = seed;
      pre.examples = make_pretrain_mixture(pairs, PretrainTaskSet{}, mix_rng);
      for (const CaptionPair& p : pairs) pre.scene_ids.push_back(p.scene_id);
      check_disjoint(pre, eval_held);

      Model base(cfg.model, derive_seed(seed, "zs-model"));
      train_mixture(cfg, base, vocab, {&pre}, cfg.steps_pretrain,
                    derive_seed(seed, "zs-pretrain"));
      EvalResult r0 = evaluate_exact(base, vocab, eval_held);
      pretrained[si] = r0.accuracy;
      baseline[si] = majority_baseline(r0.golds);
      sinks[si].add("zero_shot_pretrained_seed" + std::to_string(si), std::move(r0));

      auto train_arm = [&](const std::vector<Family>& fams, const char* label) {
        Model m(cfg.model, derive_seed(seed, "zs-model"));
        m.copy_parameters_from(base);
        std::vector<const FamilyDataset*> members;
        for (Family f : fams) members.push_back(&trains.at(f));
        train_mixture(cfg, m, vocab, members, cfg.steps_mixture,
                      derive_seed(seed, std::string("zs-train-") + label));
        EvalResult r = evaluate_exact(m, vocab, eval_held);
        sinks[si].add(std::string("zero_shot_") + label + "_seed" + std::to_string(si), r);
        return r.accuracy;
      };
      acc4[si] = train_arm(cfg.mix4, "mixture4");
      acc8[si] = train_arm(cfg.mix8, "mixture8");
    });
  }
  run_parallel(jobs, cfg.jobs);

  MetricReport r;
  r.experiment = "zero_shot";
  r.seed = cfg.seeds.empty() ? 0 : cfg.seeds[0];
  r.config_hash = protocol_config_hash(cfg);
  add_median(r, "pretrained_only", "accuracy", pretrained);
  add_median(r, "mixture_4", "accuracy", acc4);
  add_median(r, "mixture_8", "accuracy", acc8);
  r.baselines["held_majority_median"] = median(baseline);
  r.wall_clock_sec = std::chrono::duration<double>(Clock::now() - t0).count();
  for (auto& s : sinks) s.write(out_dir);
  if (!out_dir.empty()) r.save(out_dir);
  return r;
}

// ---------------------------------------------------------------------------
// forgetting (train mixture, finetune one task, measure the drop)
// ---------------------------------------------------------------------------

MetricReport run_forgetting(const ProtocolConfig& cfg, const Vocab& vocab,
                            const std::string& out_dir) {
  auto t0 = Clock::now();
  save_protocol_config(cfg, out_dir);
  if (std::find(cfg.forget_base.begin(), cfg.forget_base.end(), cfg.forget_probe) ==
      cfg.forget_base.end())
    throw ConfigError("forgetting: probe family must belong to the base mixture");
  if (std::find(cfg.forget_base.begin(), cfg.forget_base.end(), cfg.forget_new) !=
      cfg.forget_base.end())
    throw ConfigError("forgetting: the finetune family must be outside the base mixture");

  size_t n_seeds = cfg.seeds.size();
  std::vector<double> probe_pre(n_seeds), probe_post(n_seeds), new_pre(n_seeds),
      new_post(n_seeds), probe_single(n_seeds), new_single(n_seeds), probe_allmix(n_seeds),
      new_allmix(n_seeds);
  std::vector<DumpSink> sinks(n_seeds);

  std::vector<std::function<void()>> jobs;
  for (size_t si = 0; si < n_seeds; ++si) {
    jobs.push_back([&, si] {
      uint64_t seed = cfg.seeds[si];
      FamilyDataset eval_probe = build_dataset(cfg.forget_probe, cfg.eval_examples,
                                               derive_seed(seed, "fg-eval-probe"), cfg.scene);
      eval_probe.name = "eval_probe";
      FamilyDataset eval_new = build_dataset(cfg.forget_new, cfg.eval_examples,
                                             derive_seed(seed, "fg-eval-new"), cfg.scene);
      eval_new.name = "eval_new";
      auto excl = eval_probe.scene_id_set();
      for (uint64_t id : eval_new.scene_ids) excl.insert(id);

      std::map<Family, FamilyDataset> trains;
      std::vector<Family> all = cfg.forget_base;
      all.push_back(cfg.forget_new);
      for (Family f : all) {
        FamilyDataset ds = build_dataset(f, cfg.train_examples,
                                         derive_seed(seed, "fg-train:" + to_string(f)),
                                         cfg.scene, excl);
        check_disjoint(ds, eval_probe);
        check_disjoint(ds, eval_new);
        trains.emplace(f, std::move(ds));
      }

      Model init(cfg.model, derive_seed(seed, "fg-model"));
      auto clone = [&]() {
        Model m(cfg.model, derive_seed(seed, "fg-model"));
        m.copy_parameters_from(init);
        return m;
      };
      std::vector<const FamilyDataset*> base_members;
      for (Family f : cfg.forget_base) base_members.push_back(&trains.at(f));

      // phase 1: base mixture (includes the probe family)
      Model mix = clone();
      train_mixture(cfg, mix, vocab, base_members, cfg.steps_mixture,
                    derive_seed(seed, "fg-mix"));
      EvalResult pre_p = evaluate_exact(mix, vocab, eval_probe);
      EvalResult pre_n = evaluate_exact(mix, vocab, eval_new);
      probe_pre[si] = pre_p.accuracy;
      new_pre[si] = pre_n.accuracy;
      sinks[si].add("forgetting_mixture_probe_seed" + std::to_string(si), std::move(pre_p));

      // phase 2: finetune the mixture checkpoint on the new family only
      Model ft = clone();
      ft.copy_parameters_from(mix);
      {
        Optimizer opt = fresh_optimizer(cfg, ft);
        TrainOptions topt;
        topt.opt = cfg.opt;
        topt.vocab_hash = vocab.hash();
        finetune(ft, opt, vocab, trains.at(cfg.forget_new), cfg.steps_finetune, cfg.batch_size,
                 derive_seed(seed, "fg-ft"), topt);
      }
      EvalResult post_p = evaluate_exact(ft, vocab, eval_probe);
      EvalResult post_n = evaluate_exact(ft, vocab, eval_new);
      probe_post[si] = post_p.accuracy;
      new_post[si] = post_n.accuracy;
      sinks[si].add("forgetting_finetuned_probe_seed" + std::to_string(si), std::move(post_p));
      sinks[si].add("forgetting_finetuned_new_seed" + std::to_string(si), std::move(post_n));

      // single-task references
      Model sp = clone();
      train_mixture(cfg, sp, vocab, {&trains.at(cfg.forget_probe)}, cfg.steps_single,
                    derive_seed(seed, "fg-single-probe"));
      probe_single[si] = evaluate_exact(sp, vocab, eval_probe).accuracy;
      Model sn = clone();
      train_mixture(cfg, sn, vocab, {&trains.at(cfg.forget_new)}, cfg.steps_single,
                    derive_seed(seed, "fg-single-new"));
      new_single[si] = evaluate_exact(sn, vocab, eval_new).accuracy;

      // the all-in mixture (base + new) for the maintains-performance row
      Model am = clone();
      std::vector<const FamilyDataset*> all_members = base_members;
      all_members.push_back(&trains.at(cfg.forget_new));
      train_mixture(cfg, am, vocab, all_members, cfg.steps_mixture,
                    derive_seed(seed, "fg-allmix"));
      probe_allmix[si] = evaluate_exact(am, vocab, eval_probe).accuracy;
      new_allmix[si] = evaluate_exact(am, vocab, eval_new).accuracy;
    });
  }
  run_parallel(jobs, cfg.jobs);

  MetricReport r;
  r.experiment = "forgetting";
  r.seed = cfg.seeds.empty() ? 0 : cfg.seeds[0];
  r.config_hash = protocol_config_hash(cfg);
  add_median(r, "mixture", "probe_accuracy", probe_pre);
  add_median(r, "mixture", "new_accuracy", new_pre);
  add_median(r, "finetuned", "probe_accuracy", probe_post);
  add_median(r, "finetuned", "new_accuracy", new_post);
  add_median(r, "single_probe", "probe_accuracy", probe_single);
  add_median(r, "single_new", "new_accuracy", new_single);
  add_median(r, "all_mixture", "probe_accuracy", probe_allmix);
  add_median(r, "all_mixture", "new_accuracy", new_allmix);
  r.wall_clock_sec = std::chrono::duration<double>(Clock::now() - t0).count();
  for (auto& s : sinks) s.write(out_dir);
  if (!out_dir.empty()) r.save(out_dir);
  return r;
}

// ---------------------------------------------------------------------------
// pretraining-task ablation
// ---------------------------------------------------------------------------

MetricReport run_pretrain_ablation(const ProtocolConfig& cfg, const Vocab& vocab,
                                   const std::string& out_dir) {
  auto t0 = Clock::now();
  save_protocol_config(cfg, out_dir);
  struct Arm {
    const char* name;
    PretrainTaskSet tasks;
  };
  const std::vector<Arm> arms = {{"ic", PretrainTaskSet::only(TaskTag::ic)},
                                 {"cmp", PretrainTaskSet::only(TaskTag::cmp)},
                                 {"itm", PretrainTaskSet::only(TaskTag::itm)},
                                 {"mlm", PretrainTaskSet::only(TaskTag::mlm)},
                                 {"all4", PretrainTaskSet{}}};
  size_t n_seeds = cfg.seeds.size();
  // accs[arm][family][seed]
  std::vector<std::vector<std::vector<double>>> accs(
      arms.size(), std::vector<std::vector<double>>(cfg.downstream.size(),
                                                    std::vector<double>(n_seeds, 0.0)));

  std::vector<std::function<void()>> jobs;
  for (size_t si = 0; si < n_seeds; ++si)
    for (size_t ai = 0; ai < arms.size(); ++ai)
      jobs.push_back([&, si, ai] {
        uint64_t seed = cfg.seeds[si];
        std::vector<FamilyDataset> evals;
        std::unordered_set<uint64_t> excl;
        for (Family f : cfg.downstream) {
          evals.push_back(build_dataset(f, cfg.eval_examples,
                                        derive_seed(seed, "pa-eval:" + to_string(f)),
                                        cfg.scene));
          evals.back().name = "eval_" + to_string(f);
          for (uint64_t id : evals.back().scene_ids) excl.insert(id);
        }
        std::vector<FamilyDataset> trains;
        for (Family f : cfg.downstream) {
          trains.push_back(build_dataset(f, cfg.train_examples,
                                         derive_seed(seed, "pa-train:" + to_string(f)),
                                         cfg.scene, excl));
          for (const FamilyDataset& ev : evals) check_disjoint(trains.back(), ev);
        }
        std::vector<CaptionPair> pairs = build_caption_pairs(
            cfg.pretrain_pairs, derive_seed(seed, "pa-pairs"), cfg.scene, excl);

        Rng mix_rng(derive_seed(seed, std::string("pa-mix:") + arms[ai].name));
        FamilyDataset pre;
        pre.name = std::string("pretrain_") + arms[ai].name;
        pre.family = Family::caption;
        pre.seed = seed;
        pre.examples = make_pretrain_mixture(pairs, arms[ai].tasks, mix_rng);
        for (const CaptionPair& p : pairs) pre.scene_ids.push_back(p.scene_id);

        Model m(cfg.model, derive_seed(seed, "pa-model"));
        train_mixture(cfg, m, vocab, {&pre}, cfg.steps_pretrain,
                      derive_seed(seed, std::string("pa-pretrain:") + arms[ai].name));
        std::vector<const FamilyDataset*> members;
        for (const FamilyDataset& t : trains) members.push_back(&t);
        train_mixture(cfg, m, vocab, members, cfg.steps_downstream,
                      derive_seed(seed, std::string("pa-downstream:") + arms[ai].name));
        for (size_t fi = 0; fi < evals.size(); ++fi)
          accs[ai][fi][si] = evaluate_exact(m, vocab, evals[fi]).accuracy;
      });
  run_parallel(jobs, cfg.jobs);

  MetricReport r;
  r.experiment = "pretrain_ablation";
  r.seed = cfg.seeds.empty() ? 0 : cfg.seeds[0];
  r.config_hash = protocol_config_hash(cfg);
  for (size_t ai = 0; ai < arms.size(); ++ai)
    for (size_t fi = 0; fi < cfg.downstream.size(); ++fi)
      add_median(r, arms[ai].name, "acc_" + to_string(cfg.downstream[fi]), accs[ai][fi]);
  if (r.rows.size() != arms.size())
    throw NumericError("pretrain_ablation: report is missing rows");
  r.wall_clock_sec = std::chrono::duration<double>(Clock::now() - t0).count();
  if (!out_dir.empty()) r.save(out_dir);
  return r;
}

// ---------------------------------------------------------------------------
// fusion ablation
// ---------------------------------------------------------------------------

MetricReport run_fusion_ablation(const ProtocolConfig& cfg, const Vocab& vocab,
                                 const std::string& out_dir) {
  auto t0 = Clock::now();
  save_protocol_config(cfg, out_dir);
  uint64_t seed = cfg.seeds.empty() ? 11 : cfg.seeds[0];

  std::vector<FamilyDataset> evals;
  std::unordered_set<uint64_t> excl;
  for (Family f : cfg.fusion_families) {
    evals.push_back(build_dataset(f, cfg.eval_examples,
                                  derive_seed(seed, "fu-eval:" + to_string(f)), cfg.scene));
    evals.back().name = "eval_" + to_string(f);
    for (uint64_t id : evals.back().scene_ids) excl.insert(id);
  }
  std::vector<FamilyDataset> trains;
  for (Family f : cfg.fusion_families) {
    trains.push_back(build_dataset(f, cfg.train_examples,
                                   derive_seed(seed, "fu-train:" + to_string(f)), cfg.scene,
                                   excl));
    for (const FamilyDataset& ev : evals) check_disjoint(trains.back(), ev);
  }

  MetricReport r;
  r.experiment = "fusion_ablation";
  r.seed = seed;
  r.config_hash = protocol_config_hash(cfg);
  DumpSink sink;

  const std::vector<FusionKind> kinds = {FusionKind::concat_encoder,
                                         FusionKind::encoder_decoder};
  std::vector<long> params(kinds.size(), 0);
  std::vector<std::vector<double>> accs(kinds.size(),
                                        std::vector<double>(cfg.fusion_families.size(), 0.0));
  std::vector<std::function<void()>> jobs;
  for (size_t ki = 0; ki < kinds.size(); ++ki)
    jobs.push_back([&, ki] {
      ModelConfig mc = cfg.model;
      mc.fusion_kind = kinds[ki];
      Model m(mc, derive_seed(seed, "fu-model"));
      params[ki] = m.parameter_count();
      std::vector<const FamilyDataset*> members;
      for (const FamilyDataset& t : trains) members.push_back(&t);
      train_mixture(cfg, m, vocab, members, cfg.steps_mixture,
                    derive_seed(seed, "fu-train-" + to_string(kinds[ki])));
      for (size_t fi = 0; fi < evals.size(); ++fi)
        accs[ki][fi] = evaluate_exact(m, vocab, evals[fi]).accuracy;
    });
  run_parallel(jobs, cfg.jobs);

  for (size_t ki = 0; ki < kinds.size(); ++ki) {
    std::string row = to_string(kinds[ki]);
    for (size_t fi = 0; fi < cfg.fusion_families.size(); ++fi)
      r.rows[row]["acc_" + to_string(cfg.fusion_families[fi])] = accs[ki][fi];
    r.integers["params_" + row] = params[ki];
  }
  for (size_t fi = 0; fi < evals.size(); ++fi) {
    std::vector<std::string> golds;
    for (const TaskExample& e : evals[fi].examples) golds.push_back(e.target_text);
    r.baselines["majority_" + to_string(cfg.fusion_families[fi])] = majority_baseline(golds);
  }
  r.wall_clock_sec = std::chrono::duration<double>(Clock::now() - t0).count();
  sink.write(out_dir);
  if (!out_dir.empty()) r.save(out_dir);
  return r;
}

// ---------------------------------------------------------------------------
// detection-as-text
// ---------------------------------------------------------------------------

MetricReport run_detect_eval(const ProtocolConfig& cfg, const Vocab& vocab,
                             const std::string& out_dir) {
  auto t0 = Clock::now();
  save_protocol_config(cfg, out_dir);
  uint64_t seed = cfg.seeds.empty() ? 11 : cfg.seeds[0];
  for (Family f : cfg.detect_mix)
    if (f == Family::detect_text)
      throw ConfigError("detect_eval: the zero-shot mixture must not contain detect_text");

  FamilyDataset eval_detect = build_dataset(Family::detect_text, cfg.eval_examples,
                                            derive_seed(seed, "de-eval"), cfg.scene);
  eval_detect.name = "eval_detect";
  auto excl = eval_detect.scene_id_set();

  FamilyDataset detect_train = build_dataset(Family::detect_text, cfg.train_examples,
                                             derive_seed(seed, "de-train:detect_text"),
                                             cfg.scene, excl);
  check_disjoint(detect_train, eval_detect);
  std::vector<FamilyDataset> mix_trains;
  for (Family f : cfg.detect_mix) {
    mix_trains.push_back(build_dataset(f, cfg.train_examples,
                                       derive_seed(seed, "de-train:" + to_string(f)), cfg.scene,
                                       excl));
    check_disjoint(mix_trains.back(), eval_detect);
  }
  std::vector<CaptionPair> pairs =
      build_caption_pairs(cfg.pretrain_pairs, derive_seed(seed, "de-pairs"), cfg.scene, excl);

  std::vector<std::vector<std::string>> gold_names;
  for (const TaskExample& e : eval_detect.examples) gold_names.push_back(tokenize(e.target_text));

  auto eval_prf = [&](const Model& m, const std::string& dump_name, DumpSink& sink) {
    EvalResult res;
    for (const TaskExample& e : eval_detect.examples) {
      res.golds.push_back(e.target_text);
      res.preds.push_back(m.answer(e, vocab));
    }
    Prf prf = detection_f1_micro(res.preds, gold_names);
    sink.add(dump_name, std::move(res));
    return prf;
  };

  const std::vector<std::string> arm_names = {"detect_from_scratch", "detect_from_pretrain",
                                              "mixture_plus_detect", "zero_shot_mixture"};
  std::vector<Prf> prfs(arm_names.size());
  std::vector<DumpSink> sinks(arm_names.size());
  std::vector<std::function<void()>> jobs;
  for (size_t ai = 0; ai < arm_names.size(); ++ai)
    jobs.push_back([&, ai] {
      Model m(cfg.model, derive_seed(seed, "de-model"));
      std::vector<const FamilyDataset*> members;
      switch (ai) {
        case 0:  // detect only, random init
          train_mixture(cfg, m, vocab, {&detect_train}, cfg.steps_single,
                        derive_seed(seed, "de-scratch"));
          break;
        case 1: {  // detect only, after pretraining
          Rng mix_rng(derive_seed(seed, "de-premix"));
          FamilyDataset pre;
          pre.name = "pretrain_all4";
          pre.family = Family::caption;
          pre.seed = seed;
          pre.examples = make_pretrain_mixture(pairs, PretrainTaskSet{}, mix_rng);
          for (const CaptionPair& p : pairs) pre.scene_ids.push_back(p.scene_id);
          train_mixture(cfg, m, vocab, {&pre}, cfg.steps_pretrain,
                        derive_seed(seed, "de-pretrain"));
          train_mixture(cfg, m, vocab, {&detect_train}, cfg.steps_single,
                        derive_seed(seed, "de-after-pretrain"));
          break;
        }
        case 2:  // QA mixture + detect data
          for (const FamilyDataset& t : mix_trains) members.push_back(&t);
          members.push_back(&detect_train);
          train_mixture(cfg, m, vocab, members, cfg.steps_mixture,
                        derive_seed(seed, "de-mixture-detect"));
          break;
        case 3:  // QA mixture without any detect data
          for (const FamilyDataset& t : mix_trains) members.push_back(&t);
          train_mixture(cfg, m, vocab, members, cfg.steps_mixture,
                        derive_seed(seed, "de-mixture-zs"));
          break;
      }
      prfs[ai] = eval_prf(m, "detect_" + arm_names[ai], sinks[ai]);
    });
  run_parallel(jobs, cfg.jobs);

  MetricReport r;
  r.experiment = "detect_eval";
  r.seed = seed;
  r.config_hash = protocol_config_hash(cfg);
  for (size_t ai = 0; ai < arm_names.size(); ++ai) {
    r.rows[arm_names[ai]]["precision"] = prfs[ai].precision;
    r.rows[arm_names[ai]]["recall"] = prfs[ai].recall;
    r.rows[arm_names[ai]]["f1"] = prfs[ai].f1;
  }
  r.wall_clock_sec = std::chrono::duration<double>(Clock::now() - t0).count();
  for (auto& s : sinks) s.write(out_dir);
  if (!out_dir.empty()) r.save(out_dir);
  return r;
}

MetricReport run_protocol(ProtocolKind kind, const ProtocolConfig& cfg, const Vocab& vocab,
                          const std::string& out_dir) {
  switch (kind) {
    case ProtocolKind::zero_shot: return run_zero_shot(cfg, vocab, out_dir);
    case ProtocolKind::forgetting: return run_forgetting(cfg, vocab, out_dir);
    case ProtocolKind::pretrain_ablation: return run_pretrain_ablation(cfg, vocab, out_dir);
    case ProtocolKind::fusion_ablation: return run_fusion_ablation(cfg, vocab, out_dir);
    case ProtocolKind::detect_eval: return run_detect_eval(cfg, vocab, out_dir);
  }
  throw ConfigError("bad protocol kind");
}

}  // namespace vqamix
