// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vqamix/example.hpp"
#include "vqamix/graph.hpp"
#include "vqamix/vocab.hpp"

namespace vqamix {

enum class FusionKind : uint8_t { concat_encoder, encoder_decoder };

std::string to_string(FusionKind k);
FusionKind fusion_kind_from_string(const std::string& s);

struct ModelConfig {
  int d_model = 128;
  int image_h = 32, image_w = 32;
  int downsample = 8;                      // grid extents are image / downsample
  std::vector<int> conv_channels = {32, 64};  // hidden conv widths; final block maps to d_model
  int text_layers = 2, text_heads = 4;
  int fusion_layers = 2, fusion_heads = 4;
  int decoder_layers = 2, decoder_heads = 4;
  int ffn_mult = 4;
  int vocab_size = 512;
  int max_text_len = 32;
  int max_decode_len = 24;
  FusionKind fusion_kind = FusionKind::concat_encoder;
  double init_scale = 1.0;  // multiplies the fan-in-based weight stddev
  double ln_eps = 1e-5;

  int grid_h() const { return image_h / downsample; }
  int grid_w() const { return image_w / downsample; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

enum class Segment : uint8_t { image_1, image_2, text };

// Concatenated image/text features plus per-position segment labels. Under
// encoder_decoder fusion only the text-query positions remain.
struct FusedSeq {
  Var features;
  std::vector<Segment> segments;
};

// The full network: conv image encoder to an HxW feature grid, transformer
// text encoder, fusion over the concatenated sequence with relative position
// biases (2-d buckets within an image, 1-d over text offsets, one learned
// scalar per head for cross-segment pairs), and a causal text decoder.
class Model {
 public:
  Model(ModelConfig cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const std::vector<Parameter*>& parameters() const { return param_ptrs_; }
  Parameter* find_parameter(const std::string& name) const;
  long parameter_count() const;
  // Copies parameter values from a structurally identical model.
  void copy_parameters_from(const Model& other);

  Var encode_image(Graph& g, const Image& image) const;  // [H*W x d]
  // Conv stack over an already-lifted pixel tensor [image_h x image_w x 3];
  // differentiable through to the pixels.
  Var image_features(Graph& g, Var pixels) const;
  Var encode_text(Graph& g, const std::vector<int>& ids) const;      // [L x d]
  // Dispatches on fusion_kind; grids holds 1 or 2 feature grids.
  FusedSeq fuse(Graph& g, const std::vector<Var>& grids, Var text) const;
  FusedSeq fuse_concat(Graph& g, const std::vector<Var>& grids, Var text) const;
  FusedSeq fuse_xattn(Graph& g, const std::vector<Var>& grids, Var text) const;

  // Teacher-forced decoder logits over the whole input, [T x V].
  Var decoder_logits(Graph& g, const FusedSeq& memory, const std::vector<int>& dec_input) const;
  // Next-token logits [V] for a generation prefix (the decoder start token is
  // implicit).
  Var decode_step(Graph& g, const FusedSeq& memory, const std::vector<int>& prefix) const;
  std::vector<int> generate_greedy(Graph& g, const FusedSeq& memory, int max_len) const;

  // Token-mean cross entropy over the batch; identical path for every tag.
  Var forward_loss(Graph& g, std::span<const TaskExample* const> batch, const Vocab& vocab) const;
  Var forward_loss(Graph& g, const std::vector<TaskExample>& batch, const Vocab& vocab) const;

  // End-to-end greedy answer for one example (no-grad; thread-safe on a
  // finalized model).
  std::string answer(const TaskExample& e, const Vocab& vocab, int max_len = -1) const;

 private:
  struct Attn {
    Parameter *wq, *wk, *wv, *wo;
    Parameter* bias_table = nullptr;  // null for cross-attention
    int heads = 1;
  };
  struct Ln {
    Parameter *gain, *bias;
  };
  struct Ffn {
    Parameter *w1, *w2;
  };
  struct EncLayer {
    Ln ln1;
    Attn attn;
    Ln ln2;
    Ffn ffn;
  };
  struct XLayer {
    Ln ln1;
    Attn self_attn;
    Ln ln2;
    Attn cross_attn;
    Ln ln3;
    Ffn ffn;
  };
  struct ConvBlock {
    Parameter *kernel, *bias;
  };

  Parameter* add_param(const std::string& name, std::vector<int> shape, double stddev,
                       Rng& rng);
  Attn make_attn(const std::string& prefix, int heads, int bias_buckets, Rng& rng);
  Ln make_ln(const std::string& prefix, Rng& rng);
  Ffn make_ffn(const std::string& prefix, Rng& rng);

  Var attention(Graph& g, Var q_in, Var kv_in, const Attn& p, const IntMat* buckets,
                const Tensor* add_mask) const;
  Var enc_layer(Graph& g, Var x, const EncLayer& l, const IntMat& buckets) const;
  Var ffn_apply(Graph& g, Var x, const Ffn& f) const;
  Var ln_apply(Graph& g, Var x, const Ln& l) const;

  IntMat text_buckets(int len) const;
  IntMat decoder_buckets(int len) const;
  IntMat fusion_buckets(const std::vector<Segment>& segments) const;
  int fusion_bucket_count() const;
  int text_bucket_count() const { return 2 * cfg_.max_text_len - 1; }
  int decoder_bucket_count() const { return 2 * cfg_.max_decode_len - 1; }

  ModelConfig cfg_;
  std::vector<std::unique_ptr<Parameter>> params_;
  std::vector<Parameter*> param_ptrs_;

  Parameter* tok_embed_;
  Parameter* out_proj_;
  std::vector<ConvBlock> conv_;
  Ln grid_ln_;
  std::vector<EncLayer> text_layers_;
  Ln text_ln_f_;
  std::vector<EncLayer> fusion_layers_;   // concat_encoder
  std::vector<XLayer> xfusion_layers_;    // encoder_decoder
  Ln fusion_ln_f_;
  std::vector<XLayer> dec_layers_;
  Ln dec_ln_f_;
};

}  // namespace vqamix
