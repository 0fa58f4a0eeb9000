// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#include "vqamix/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace vqamix {

namespace {

constexpr char kMagic[8] = {'V', 'Q', 'M', 'X', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

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
  using U = std::make_unsigned_t<T>;
  U v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) {
    int c = in.get();
    if (c == EOF) throw IoError("checkpoint: unexpected end of file");
    v |= static_cast<U>(static_cast<uint8_t>(c)) << (8 * i);
  }
  return static_cast<T>(v);
}

void put_f64(std::ostream& out, double d) { put<uint64_t>(out, std::bit_cast<uint64_t>(d)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get<uint64_t>(in)); }

void put_string(std::ostream& out, const std::string& s) {
  put<uint32_t>(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  uint32_t n = get<uint32_t>(in);
  std::string s(n, '\0');
  if (!in.read(s.data(), n)) throw IoError("checkpoint: truncated string");
  return s;
}

void put_tensor(std::ostream& out, const Tensor& t) {
  put<uint8_t>(out, static_cast<uint8_t>(t.ndim()));
  for (int i = 0; i < t.ndim(); ++i) put<uint32_t>(out, static_cast<uint32_t>(t.dim(i)));
  for (int i = 0; i < t.size(); ++i) put_f64(out, t[i]);
}

Tensor get_tensor(std::istream& in) {
  int nd = get<uint8_t>(in);
  std::vector<int> shape;
  for (int i = 0; i < nd; ++i) shape.push_back(static_cast<int>(get<uint32_t>(in)));
  Tensor t(std::move(shape));
  for (int i = 0; i < t.size(); ++i) t[i] = get_f64(in);
  return t;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, uint64_t vocab_hash,
                     uint64_t trained_steps, const Optimizer* opt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  put<uint32_t>(out, kVersion);
  put_string(out, nlohmann::json(model.config()).dump());
  put<uint64_t>(out, vocab_hash);
  put<uint64_t>(out, trained_steps);
  const auto& params = model.parameters();
  put<uint32_t>(out, static_cast<uint32_t>(params.size()));
  for (const Parameter* p : params) {
    put_string(out, p->name);
    put_tensor(out, p->value);
  }
  if (opt != nullptr) {
    if (opt->params().size() != params.size())
      throw IoError("checkpoint: optimizer does not cover the model's parameters");
    put<uint8_t>(out, 1);
    put<uint8_t>(out, static_cast<uint8_t>(opt->config().kind));
    put_f64(out, opt->config().lr);
    put_f64(out, opt->config().beta1);
    put_f64(out, opt->config().beta2);
    put_f64(out, opt->config().epsilon);
    put<uint64_t>(out, opt->step_count());
    if (opt->config().kind == OptKind::adam) {
      Optimizer* mo = const_cast<Optimizer*>(opt);
      for (const Tensor& t : mo->first_moments()) put_tensor(out, t);
      for (const Tensor& t : mo->second_moments()) put_tensor(out, t);
    }
  } else {
    put<uint8_t>(out, 0);
  }
  if (!out) throw IoError("checkpoint: write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path, uint64_t expected_vocab_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot read " + path);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("checkpoint: bad magic in " + path);
  uint32_t version = get<uint32_t>(in);
  if (version != kVersion)
    throw IoError("checkpoint: unsupported format version " + std::to_string(version));
  ModelConfig cfg = nlohmann::json::parse(get_string(in)).get<ModelConfig>();
  LoadedCheckpoint lc;
  lc.vocab_hash = get<uint64_t>(in);
  if (expected_vocab_hash != 0 && lc.vocab_hash != expected_vocab_hash)
    throw DataError("checkpoint: vocabulary hash mismatch (checkpoint was written under a "
                    "different vocabulary)");
  lc.trained_steps = get<uint64_t>(in);
  lc.model = std::make_unique<Model>(cfg, /*seed=*/0);
  uint32_t n = get<uint32_t>(in);
  if (n != lc.model->parameters().size())
    throw IoError("checkpoint: parameter count mismatch against the stored config");
  for (uint32_t i = 0; i < n; ++i) {
    std::string name = get_string(in);
    Tensor t = get_tensor(in);
    Parameter* p = lc.model->find_parameter(name);
    if (p == nullptr) throw IoError("checkpoint: unknown parameter '" + name + "'");
    if (!p->value.same_shape(t))
      throw IoError("checkpoint: parameter '" + name + "' has shape " + t.shape_str() +
                    ", expected " + p->value.shape_str());
    p->value = std::move(t);
  }
  if (get<uint8_t>(in) == 1) {
    lc.has_optimizer = true;
    lc.opt_config.kind = static_cast<OptKind>(get<uint8_t>(in));
    lc.opt_config.lr = get_f64(in);
    lc.opt_config.beta1 = get_f64(in);
    lc.opt_config.beta2 = get_f64(in);
    lc.opt_config.epsilon = get_f64(in);
    lc.opt_step_count = get<uint64_t>(in);
    if (lc.opt_config.kind == OptKind::adam) {
      for (uint32_t i = 0; i < n; ++i) lc.first_moments.push_back(get_tensor(in));
      for (uint32_t i = 0; i < n; ++i) lc.second_moments.push_back(get_tensor(in));
    }
  }
  return lc;
}

std::unique_ptr<Optimizer> LoadedCheckpoint::take_optimizer() {
  if (!has_optimizer) throw IoError("checkpoint holds no optimizer state");
  auto opt = std::make_unique<Optimizer>(opt_config, model->parameters());
  if (opt_config.kind == OptKind::adam) {
    opt->first_moments() = std::move(first_moments);
    opt->second_moments() = std::move(second_moments);
  }
  opt->set_step_count(opt_step_count);
  return opt;
}

}  // namespace vqamix
