// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#include "vqamix/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unordered_set>

#include "vqamix/checkpoint.hpp"

namespace vqamix {

void MixtureSpec::validate() const {
  if (members.empty()) throw ConfigError("mixture needs at least one dataset");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  int n = static_cast<int>(members.size());
  if (batch_size % n != 0)
    throw ConfigError("batch_size " + std::to_string(batch_size) +
                      " is not divisible by the number of datasets " + std::to_string(n));
  std::unordered_set<std::string> names;
  for (const Member& m : members) {
    if (m.data == nullptr || m.data->examples.empty())
      throw ConfigError("mixture member '" + m.name + "' is empty");
    if (!names.insert(m.name).second)
      throw ConfigError("duplicate mixture member name '" + m.name + "'");
  }
  if (steps < 0) throw ConfigError("steps must be non-negative");
}

BatchComposer::BatchComposer(const MixtureSpec& spec) : spec_(spec) {
  spec.validate();
  for (size_t i = 0; i < spec.members.size(); ++i) {
    const MixtureSpec::Member& m = spec.members[i];
    Cursor c{m.data, {}, 0,
             Rng(derive_seed(spec.seed, "mixture-cursor:" + m.name, static_cast<uint64_t>(i)))};
    c.order.resize(m.data->examples.size());
    for (size_t k = 0; k < c.order.size(); ++k) c.order[k] = static_cast<int>(k);
    c.rng.shuffle(c.order);
    cursors_.push_back(std::move(c));
    counts_[m.name] = 0;
  }
}

std::vector<const TaskExample*> BatchComposer::next() {
  std::vector<const TaskExample*> batch;
  batch.reserve(static_cast<size_t>(spec_.batch_size));
  int share = spec_.per_member();
  for (size_t i = 0; i < cursors_.size(); ++i) {
    Cursor& c = cursors_[i];
    for (int k = 0; k < share; ++k) {
      if (c.pos >= c.order.size()) {
        c.rng.shuffle(c.order);
        c.pos = 0;
      }
      batch.push_back(&c.data->examples[static_cast<size_t>(c.order[c.pos++])]);
    }
    counts_[spec_.members[i].name] += share;
  }
  return batch;
}

uint64_t train_config_hash(const Model& model, const MixtureSpec& spec,
                           const OptimizerConfig& opt) {
  nlohmann::json j;
  j["model"] = model.config();
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : spec.members)
    members.push_back({{"name", m.name}, {"seed", m.data->seed}, {"n", m.data->examples.size()}});
  j["mixture"] = {{"members", members},
                  {"batch_size", spec.batch_size},
                  {"steps", spec.steps},
                  {"seed", spec.seed}};
  j["optimizer"] = {{"kind", to_string(opt.kind)},
                    {"lr", opt.lr},
                    {"beta1", opt.beta1},
                    {"beta2", opt.beta2},
                    {"epsilon", opt.epsilon}};
  return fnv1a64(j.dump());
}

TrainRunRecord train(Model& model, Optimizer& opt, const Vocab& vocab, const MixtureSpec& spec,
                     const TrainOptions& options) {
  spec.validate();
  if (options.vocab_hash != 0)
    for (const auto& m : spec.members)
      if (m.data->vocab_hash != 0 && m.data->vocab_hash != options.vocab_hash)
        throw ConfigError("dataset '" + m.name +
                          "' was generated under a different vocabulary than this run");

  TrainRunRecord rec;
  rec.config_hash = train_config_hash(model, spec, opt.config());
  BatchComposer composer(spec);

  std::ofstream log;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    log.open(options.out_dir + "/loss.jsonl", options.init_steps > 0 ? std::ios::app
                                                                     : std::ios::trunc);
    if (!log) throw IoError("cannot write loss log in " + options.out_dir);
  }

  auto write_checkpoint = [&](uint64_t step) {
    if (options.out_dir.empty()) return;
    std::string id = "ckpt_" + std::to_string(step);
    save_checkpoint(options.out_dir + "/" + id + ".bin", model, options.vocab_hash, step, &opt);
    rec.checkpoint_ids.push_back(id);
  };

  for (int s = 1; s <= spec.steps; ++s) {
    uint64_t global_step = options.init_steps + static_cast<uint64_t>(s);
    std::vector<const TaskExample*> batch = composer.next();
    Graph g;
    Var loss = model.forward_loss(g, batch, vocab);
    double lv = loss.value().item();
    if (!std::isfinite(lv))
      throw NumericError("training aborted: non-finite loss at step " +
                         std::to_string(global_step));
    g.backward(loss);
    opt.step();
    opt.zero_grad();
    rec.loss_curve.push_back(lv);
    rec.final_step = global_step;
    if (log.is_open())
      log << "{\"step\":" << global_step << ",\"loss\":" << lv << "}\n";
    if (options.log_stdout && (s % 50 == 0 || s == spec.steps))
      std::printf("step %llu loss %.4f\n", static_cast<unsigned long long>(global_step), lv);
    if (options.checkpoint_every > 0 && s % options.checkpoint_every == 0 && s != spec.steps)
      write_checkpoint(global_step);
  }
  rec.per_task_counts = composer.counts();
  if (!options.out_dir.empty()) {
    write_checkpoint(options.init_steps + static_cast<uint64_t>(spec.steps));
    nlohmann::json summary;
    summary["config_hash"] = rec.config_hash;
    summary["steps"] = spec.steps;
    summary["final_step"] = rec.final_step;
    summary["final_loss"] = rec.loss_curve.empty() ? 0.0 : rec.loss_curve.back();
    summary["per_task_counts"] = rec.per_task_counts;
    summary["checkpoints"] = rec.checkpoint_ids;
    std::ofstream out(options.out_dir + "/summary.json");
    out << summary.dump(2) << "\n";
  }
  return rec;
}

TrainRunRecord finetune(Model& model, Optimizer& opt, const Vocab& vocab,
                        const FamilyDataset& data, int steps, int batch_size, uint64_t seed,
                        const TrainOptions& options) {
  MixtureSpec spec;
  spec.members.push_back({data.name, &data});
  spec.batch_size = batch_size;
  spec.steps = steps;
  spec.seed = seed;
  if (steps == 0) {
    TrainRunRecord rec;
    rec.config_hash = train_config_hash(model, spec, opt.config());
    return rec;
  }
  return train(model, opt, vocab, spec, options);
}

}  // namespace vqamix
