// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#include "vqamix/runconfig.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>

namespace vqamix {

namespace {
nlohmann::json scene_json(const SceneSpec& s) {
  return {{"grid_rows", s.grid_rows},     {"grid_cols", s.grid_cols},
          {"min_objects", s.min_objects}, {"max_objects", s.max_objects},
          {"image_h", s.image_h},         {"image_w", s.image_w}};
}

SceneSpec scene_from_json(const nlohmann::json& j, SceneSpec d) {
  d.grid_rows = j.value("grid_rows", d.grid_rows);
  d.grid_cols = j.value("grid_cols", d.grid_cols);
  d.min_objects = j.value("min_objects", d.min_objects);
  d.max_objects = j.value("max_objects", d.max_objects);
  d.image_h = j.value("image_h", d.image_h);
  d.image_w = j.value("image_w", d.image_w);
  return d;
}

nlohmann::json opt_json(const OptimizerConfig& o) {
  return {{"kind", to_string(o.kind)},
          {"lr", o.lr},
          {"beta1", o.beta1},
          {"beta2", o.beta2},
          {"epsilon", o.epsilon}};
}

OptimizerConfig opt_from_json(const nlohmann::json& j, OptimizerConfig d) {
  d.kind = opt_kind_from_string(j.value("kind", to_string(d.kind)));
  d.lr = j.value("lr", d.lr);
  d.beta1 = j.value("beta1", d.beta1);
  d.beta2 = j.value("beta2", d.beta2);
  d.epsilon = j.value("epsilon", d.epsilon);
  return d;
}

nlohmann::json taskset_json(const PretrainTaskSet& t) {
  nlohmann::json a = nlohmann::json::array();
  if (t.ic) a.push_back("ic");
  if (t.cmp) a.push_back("cmp");
  if (t.mlm) a.push_back("mlm");
  if (t.itm) a.push_back("itm");
  return a;
}

PretrainTaskSet taskset_from_json(const nlohmann::json& a) {
  PretrainTaskSet t{false, false, false, false};
  for (const auto& v : a) {
    std::string s = v.get<std::string>();
    if (s == "ic") t.ic = true;
    else if (s == "cmp") t.cmp = true;
    else if (s == "mlm") t.mlm = true;
    else if (s == "itm") t.itm = true;
    else throw ConfigError("unknown pretraining task '" + s + "'");
  }
  if (t.enabled_count() == 0) throw ConfigError("pretraining task set is empty");
  return t;
}
}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
  if (j.contains("scene")) c.scene = scene_from_json(j.at("scene"), c.scene);
  if (j.contains("optimizer")) c.opt = opt_from_json(j.at("optimizer"), c.opt);
  c.seed = j.value("seed", c.seed);
  if (j.contains("data")) {
    const auto& d = j.at("data");
    if (d.contains("families"))
      for (const auto& f : d.at("families"))
        c.data.families.push_back(family_from_string(f.get<std::string>()));
    c.data.train_examples = d.value("train_examples", c.data.train_examples);
    c.data.eval_examples = d.value("eval_examples", c.data.eval_examples);
    c.data.vocab_size = d.value("vocab_size", c.data.vocab_size);
    c.data.seed = d.value("seed", c.seed);
  } else {
    c.data.seed = c.seed;
  }
  if (j.contains("pretrain")) {
    const auto& p = j.at("pretrain");
    c.pretrain.pairs = p.value("pairs", c.pretrain.pairs);
    if (p.contains("tasks")) c.pretrain.tasks = taskset_from_json(p.at("tasks"));
    c.pretrain.batch_size = p.value("batch_size", c.pretrain.batch_size);
    c.pretrain.steps = p.value("steps", c.pretrain.steps);
    c.pretrain.seed = p.value("seed", c.seed);
  } else {
    c.pretrain.seed = c.seed;
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    if (t.contains("datasets"))
      c.train.datasets = t.at("datasets").get<std::vector<std::string>>();
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.steps = t.value("steps", c.train.steps);
    c.train.checkpoint_every = t.value("checkpoint_every", c.train.checkpoint_every);
    c.train.seed = t.value("seed", c.seed);
  } else {
    c.train.seed = c.seed;
  }
  // the protocol block inherits model/scene/optimizer, then applies overrides
  c.protocol.model = c.model;
  c.protocol.scene = c.scene;
  c.protocol.opt = c.opt;
  if (j.contains("protocol")) {
    nlohmann::json merged = nlohmann::json(c.protocol);
    merged.merge_patch(j.at("protocol"));
    c.protocol = merged.get<ProtocolConfig>();
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  try {
    return from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config error in " + path + ": " + e.what());
  }
}

nlohmann::json RunConfig::resolved_json() const {
  nlohmann::json j;
  j["model"] = model;
  j["scene"] = scene_json(scene);
  j["optimizer"] = opt_json(opt);
  j["seed"] = seed;
  nlohmann::json fams = nlohmann::json::array();
  for (Family f : data.families) fams.push_back(to_string(f));
  j["data"] = {{"families", fams},
               {"train_examples", data.train_examples},
               {"eval_examples", data.eval_examples},
               {"vocab_size", data.vocab_size},
               {"seed", data.seed}};
  j["pretrain"] = {{"pairs", pretrain.pairs},
                   {"tasks", taskset_json(pretrain.tasks)},
                   {"batch_size", pretrain.batch_size},
                   {"steps", pretrain.steps},
                   {"seed", pretrain.seed}};
  j["train"] = {{"datasets", train.datasets},
                {"batch_size", train.batch_size},
                {"steps", train.steps},
                {"checkpoint_every", train.checkpoint_every},
                {"seed", train.seed}};
  j["protocol"] = protocol;
  return j;
}

uint64_t RunConfig::hash() const { return fnv1a64(resolved_json().dump()); }

void RunConfig::save_resolved(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir + "/resolved_config.json");
  if (!out) throw IoError("cannot write resolved config in " + dir);
  nlohmann::json j = resolved_json();
  j["config_hash"] = hash();
  out << j.dump(2) << "\n";
}

DirLock::DirLock(const std::string& dir) {
  std::filesystem::create_directories(dir);
  path_ = dir + "/.lock";
  int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0)
    throw IoError("output directory " + dir +
                  " is locked by another run (remove .lock if that run is gone)");
  ::close(fd);
}

DirLock::~DirLock() { ::unlink(path_.c_str()); }

}  // namespace vqamix
