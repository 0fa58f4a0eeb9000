// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#include "vqamix/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "CLI11.hpp"
#include "vqamix/checkpoint.hpp"
#include "vqamix/pretext.hpp"
#include "vqamix/protocols.hpp"
#include "vqamix/runconfig.hpp"

namespace vqamix {

namespace {

namespace fs = std::filesystem;

std::vector<Family> all_families() {
  std::vector<Family> out;
  for (int i = 0; i < kNumFamilies; ++i) out.push_back(static_cast<Family>(i));
  return out;
}

RunConfig load_config_or_default(const std::string& path, uint64_t seed_override) {
  RunConfig cfg = path.empty() ? RunConfig{} : RunConfig::load(path);
  if (seed_override != 0) {
    cfg.seed = seed_override;
    cfg.data.seed = seed_override;
    cfg.pretrain.seed = seed_override;
    cfg.train.seed = seed_override;
    cfg.protocol.seeds = {seed_override, seed_override + 1, seed_override + 2};
  }
  return cfg;
}

// Scene ids of every *_eval dataset present under the data directory; used to
// keep pretraining images disjoint from evaluation images.
std::unordered_set<uint64_t> eval_exclusions(const std::string& data_dir) {
  std::unordered_set<uint64_t> excl;
  for (const auto& entry : fs::directory_iterator(data_dir)) {
    std::string name = entry.path().filename().string();
    const std::string suffix = "_eval.manifest.json";
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      std::string ds_name = name.substr(0, name.size() - std::string(".manifest.json").size());
      FamilyDataset ds = load_dataset(data_dir, ds_name);
      for (uint64_t id : ds.scene_ids) excl.insert(id);
    }
  }
  return excl;
}

Vocab load_run_vocab(const std::string& data_dir) {
  std::string path = data_dir + "/vocab.txt";
  if (!fs::exists(path)) throw IoError("missing vocabulary file " + path);
  return Vocab::load(path);
}

int cmd_gendata(const RunConfig& cfg, const std::string& out_dir) {
  DirLock lock(out_dir);
  cfg.save_resolved(out_dir);
  Vocab vocab = Vocab::build(canonical_corpus(), cfg.data.vocab_size);
  vocab.save(out_dir + "/vocab.txt");

  std::vector<Family> fams = cfg.data.families.empty() ? all_families() : cfg.data.families;
  std::vector<FamilyDataset> evals;
  std::unordered_set<uint64_t> excl;
  for (Family f : fams) {
    FamilyDataset ev = build_dataset(f, cfg.data.eval_examples,
                                     derive_seed(cfg.data.seed, "eval:" + to_string(f)),
                                     cfg.scene);
    ev.name = to_string(f) + "_eval";
    ev.vocab_hash = vocab.hash();
    for (uint64_t id : ev.scene_ids) excl.insert(id);
    evals.push_back(std::move(ev));
  }
  for (Family f : fams) {
    FamilyDataset tr = build_dataset(f, cfg.data.train_examples,
                                     derive_seed(cfg.data.seed, "train:" + to_string(f)),
                                     cfg.scene, excl);
    tr.name = to_string(f) + "_train";
    tr.vocab_hash = vocab.hash();
    for (const FamilyDataset& ev : evals)
      if (!scene_sets_disjoint(tr, ev))
        throw DataError("gendata audit: " + tr.name + " overlaps " + ev.name);
    save_dataset(tr, out_dir);
    std::printf("wrote %s (%zu examples)\n", tr.name.c_str(), tr.examples.size());
  }
  for (const FamilyDataset& ev : evals) {
    save_dataset(ev, out_dir);
    std::printf("wrote %s (%zu examples)\n", ev.name.c_str(), ev.examples.size());
  }
  std::printf("vocab: %d tokens, hash %llu\n", vocab.size(),
              static_cast<unsigned long long>(vocab.hash()));
  return 0;
}

int cmd_pretrain(const RunConfig& cfg_in, const std::string& data_dir,
                 const std::string& out_dir) {
  RunConfig cfg = cfg_in;
  DirLock lock(out_dir);
  Vocab vocab = load_run_vocab(data_dir);
  cfg.model.vocab_size = vocab.size();
  cfg.save_resolved(out_dir);

  std::unordered_set<uint64_t> excl = eval_exclusions(data_dir);
  std::vector<CaptionPair> pairs = build_caption_pairs(
      cfg.pretrain.pairs, derive_seed(cfg.pretrain.seed, "pretrain-pairs"), cfg.scene, excl);
  Rng mix_rng(derive_seed(cfg.pretrain.seed, "pretrain-mix"));
  FamilyDataset pre;
  pre.name = "pretrain";
  pre.family = Family::caption;
  pre.seed = cfg.pretrain.seed;
  pre.vocab_hash = vocab.hash();
  pre.examples = make_pretrain_mixture(pairs, cfg.pretrain.tasks, mix_rng);
  for (const CaptionPair& p : pairs) pre.scene_ids.push_back(p.scene_id);

  Model model(cfg.model, derive_seed(cfg.pretrain.seed, "model"));
  Optimizer opt(cfg.opt, model.parameters());
  MixtureSpec spec;
  spec.members.push_back({pre.name, &pre});
  spec.batch_size = cfg.pretrain.batch_size;
  spec.steps = cfg.pretrain.steps;
  spec.seed = derive_seed(cfg.pretrain.seed, "pretrain-order");
  TrainOptions topt;
  topt.opt = cfg.opt;
  topt.out_dir = out_dir;
  topt.vocab_hash = vocab.hash();
  topt.log_stdout = true;
  TrainRunRecord rec = train(model, opt, vocab, spec, topt);
  std::printf("pretrain done: final loss %.4f over %zu steps\n",
              rec.loss_curve.empty() ? 0.0 : rec.loss_curve.back(), rec.loss_curve.size());
  return 0;
}

int cmd_train(const RunConfig& cfg_in, const std::string& data_dir, const std::string& out_dir,
              const std::string& init_checkpoint, bool resume_optimizer) {
  RunConfig cfg = cfg_in;
  DirLock lock(out_dir);
  Vocab vocab = load_run_vocab(data_dir);

  std::vector<std::string> names = cfg.train.datasets;
  if (names.empty()) {
    std::vector<Family> fams = cfg.data.families.empty() ? all_families() : cfg.data.families;
    for (Family f : fams) names.push_back(to_string(f) + "_train");
  }
  std::vector<FamilyDataset> datasets;
  for (const std::string& n : names) datasets.push_back(load_dataset(data_dir, n));

  std::unique_ptr<Model> model;
  std::unique_ptr<Optimizer> opt;
  uint64_t init_steps = 0;
  if (!init_checkpoint.empty()) {
    LoadedCheckpoint lc = load_checkpoint(init_checkpoint, vocab.hash());
    init_steps = lc.trained_steps;
    if (resume_optimizer && lc.has_optimizer)
      opt = lc.take_optimizer();
    model = std::move(lc.model);
  } else {
    cfg.model.vocab_size = vocab.size();
    model = std::make_unique<Model>(cfg.model, derive_seed(cfg.train.seed, "model"));
  }
  if (!opt) opt = std::make_unique<Optimizer>(cfg.opt, model->parameters());
  cfg.model = model->config();
  cfg.save_resolved(out_dir);

  MixtureSpec spec;
  for (const FamilyDataset& d : datasets) spec.members.push_back({d.name, &d});
  spec.batch_size = cfg.train.batch_size;
  spec.steps = cfg.train.steps;
  spec.seed = derive_seed(cfg.train.seed, "train-order", init_steps);
  TrainOptions topt;
  topt.opt = cfg.opt;
  topt.out_dir = out_dir;
  topt.vocab_hash = vocab.hash();
  topt.checkpoint_every = cfg.train.checkpoint_every;
  topt.init_steps = init_steps;
  topt.log_stdout = true;
  TrainRunRecord rec = train(*model, *opt, vocab, spec, topt);
  std::printf("train done: final loss %.4f at step %llu\n",
              rec.loss_curve.empty() ? 0.0 : rec.loss_curve.back(),
              static_cast<unsigned long long>(rec.final_step));
  return 0;
}

int cmd_eval_checkpoint(const std::string& checkpoint, const std::string& data_dir,
                        const std::string& dataset, const std::string& out_dir) {
  DirLock lock(out_dir);
  Vocab vocab = load_run_vocab(data_dir);
  LoadedCheckpoint lc = load_checkpoint(checkpoint, vocab.hash());
  FamilyDataset ds = load_dataset(data_dir, dataset);

  auto t0 = std::chrono::steady_clock::now();
  EvalResult res = evaluate_exact(*lc.model, vocab, ds);
  MetricReport r;
  r.experiment = "eval_" + dataset;
  r.seed = ds.seed;
  r.config_hash = fnv1a64(nlohmann::json(lc.model->config()).dump());
  r.checkpoint_id = fs::path(checkpoint).filename().string();
  r.rows[dataset]["accuracy"] = res.accuracy;
  if (ds.family == Family::detect_text) {
    std::vector<std::vector<std::string>> gold_names;
    for (const TaskExample& e : ds.examples) gold_names.push_back(tokenize(e.target_text));
    Prf prf = detection_f1_micro(res.preds, gold_names);
    r.rows[dataset]["precision"] = prf.precision;
    r.rows[dataset]["recall"] = prf.recall;
    r.rows[dataset]["f1"] = prf.f1;
  }
  r.baselines[dataset] = majority_baseline(res.golds);
  r.wall_clock_sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.save(out_dir);
  fs::create_directories(out_dir + "/preds");
  save_predictions(out_dir + "/preds/" + dataset + ".tsv", res.golds, res.preds);
  std::printf("%s accuracy %.4f (majority baseline %.4f)\n", dataset.c_str(), res.accuracy,
              r.baselines[dataset]);
  return 0;
}

int cmd_eval_protocol(const RunConfig& cfg_in, const std::string& protocol,
                      const std::string& out_dir) {
  RunConfig cfg = cfg_in;
  DirLock lock(out_dir);
  Vocab vocab = Vocab::build(canonical_corpus(), cfg.data.vocab_size);
  cfg.model.vocab_size = vocab.size();
  cfg.protocol.model.vocab_size = vocab.size();
  cfg.save_resolved(out_dir);
  vocab.save(out_dir + "/vocab.txt");

  std::vector<std::string> names =
      protocol == "all" ? protocol_names() : std::vector<std::string>{protocol};
  for (const std::string& name : names) {
    ProtocolKind kind = protocol_kind_from_string(name);
    std::printf("running protocol %s ...\n", name.c_str());
    MetricReport r = run_protocol(kind, cfg.protocol, vocab, out_dir + "/" + name);
    std::printf("protocol %s done in %.1fs\n", name.c_str(), r.wall_clock_sec);
    for (const auto& [row, metrics] : r.rows)
      for (const auto& [metric, value] : metrics)
        if (metric.find("_median") != std::string::npos || r.rows.size() <= 6)
          std::printf("  %s/%s = %.4f\n", row.c_str(), metric.c_str(), value);
    for (const auto& [k, v] : r.integers) std::printf("  %s = %ld\n", k.c_str(), v);
  }
  return 0;
}

int cmd_score(const std::string& preds_path, const std::string& out_dir, bool detect) {
  DirLock lock(out_dir);
  PredictionDump dump = load_predictions(preds_path);
  MetricReport r;
  r.experiment = "score_" + fs::path(preds_path).stem().string();
  r.rows["scored"]["accuracy"] = exact_match_accuracy(dump.preds, dump.golds);
  if (detect) {
    std::vector<std::vector<std::string>> gold_names;
    for (const std::string& g : dump.golds) gold_names.push_back(tokenize(g));
    Prf prf = detection_f1_micro(dump.preds, gold_names);
    r.rows["scored"]["precision"] = prf.precision;
    r.rows["scored"]["recall"] = prf.recall;
    r.rows["scored"]["f1"] = prf.f1;
  }
  r.baselines["majority"] = majority_baseline(dump.golds);
  r.save(out_dir);
  std::printf("scored %zu examples: accuracy %.4f\n", dump.golds.size(),
              r.rows["scored"]["accuracy"]);
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"multi-task open-vocabulary VQA training and evaluation on synthetic scenes"};
  app.require_subcommand(1);

  std::string config_path, out_dir, data_dir, checkpoint, dataset, protocol, preds_path;
  uint64_t seed_override = 0;
  bool resume_optimizer = false, detect = false;

  auto add_common = [&](CLI::App* cmd, bool needs_out = true) {
    cmd->add_option("--config", config_path, "JSON run configuration");
    cmd->add_option("--seed", seed_override, "override every seed in the configuration");
    if (needs_out) cmd->add_option("--out", out_dir, "output directory")->required();
  };

  CLI::App* gendata = app.add_subcommand("gendata", "generate datasets, manifests and the vocabulary");
  add_common(gendata);

  CLI::App* pretrain = app.add_subcommand("pretrain", "pretrain on caption pairs with the task mix");
  add_common(pretrain);
  pretrain->add_option("--data", data_dir, "directory produced by gendata")->required();

  CLI::App* train_cmd = app.add_subcommand("train", "multi-task mixture training");
  add_common(train_cmd);
  train_cmd->add_option("--data", data_dir, "directory produced by gendata")->required();
  train_cmd->add_option("--init-checkpoint", checkpoint, "start from this checkpoint");
  train_cmd->add_flag("--resume-optimizer", resume_optimizer,
                      "restore optimizer state from the checkpoint");

  CLI::App* finetune_cmd = app.add_subcommand("finetune", "continue a checkpoint on one dataset");
  add_common(finetune_cmd);
  finetune_cmd->add_option("--data", data_dir, "directory produced by gendata")->required();
  finetune_cmd->add_option("--checkpoint", checkpoint, "checkpoint to continue")->required();
  finetune_cmd->add_option("--dataset", dataset, "dataset name to finetune on")->required();

  CLI::App* eval_cmd = app.add_subcommand("eval", "run a protocol, or evaluate a checkpoint");
  add_common(eval_cmd);
  eval_cmd->add_option("--protocol", protocol,
                       "zero_shot | forgetting | pretrain_ablation | fusion_ablation | "
                       "detect_eval | all");
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint for single-dataset evaluation");
  eval_cmd->add_option("--data", data_dir, "data directory (single-dataset mode)");
  eval_cmd->add_option("--dataset", dataset, "dataset name (single-dataset mode)");

  CLI::App* score = app.add_subcommand("score", "re-score a saved prediction dump");
  add_common(score);
  score->add_option("--preds", preds_path, "prediction dump (tsv)")->required();
  score->add_flag("--detect", detect, "additionally compute multiset precision/recall/F1");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = load_config_or_default(config_path, seed_override);
    if (gendata->parsed()) return cmd_gendata(cfg, out_dir);
    if (pretrain->parsed()) return cmd_pretrain(cfg, data_dir, out_dir);
    if (train_cmd->parsed()) return cmd_train(cfg, data_dir, out_dir, checkpoint, resume_optimizer);
    if (finetune_cmd->parsed()) {
      cfg.train.datasets = {dataset};
      return cmd_train(cfg, data_dir, out_dir, checkpoint, resume_optimizer);
    }
    if (eval_cmd->parsed()) {
      if (!protocol.empty()) return cmd_eval_protocol(cfg, protocol, out_dir);
      if (!checkpoint.empty()) {
        if (data_dir.empty() || dataset.empty())
          throw ConfigError("eval --checkpoint needs --data and --dataset");
        return cmd_eval_checkpoint(checkpoint, data_dir, dataset, out_dir);
      }
      throw ConfigError("eval needs either --protocol or --checkpoint");
    }
    if (score->parsed()) return cmd_score(preds_path, out_dir, detect);
    throw ConfigError("no subcommand given");
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 4;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 5;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace vqamix
