// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#include "vqamix/model.hpp"

#include <algorithm>
#include <cmath>

namespace vqamix {

std::string to_string(FusionKind k) {
  return k == FusionKind::concat_encoder ? "concat_encoder" : "encoder_decoder";
}

FusionKind fusion_kind_from_string(const std::string& s) {
  if (s == "concat_encoder") return FusionKind::concat_encoder;
  if (s == "encoder_decoder") return FusionKind::encoder_decoder;
  throw ConfigError("unknown fusion kind '" + s + "'");
}

void ModelConfig::validate() const {
  if (d_model < 1) throw ConfigError("d_model must be positive");
  for (int heads : {text_heads, fusion_heads, decoder_heads}) {
    if (heads < 1 || d_model % heads != 0)
      throw ConfigError("d_model (" + std::to_string(d_model) +
                        ") must be divisible by every head count");
  }
  int blocks = static_cast<int>(conv_channels.size()) + 1;
  if (downsample != (1 << blocks))
    throw ConfigError("downsample must equal 2^(conv blocks); got downsample " +
                      std::to_string(downsample) + " with " + std::to_string(blocks) +
                      " blocks");
  if (image_h % downsample != 0 || image_w % downsample != 0 || grid_h() < 1 || grid_w() < 1)
    throw ConfigError("image size must be a positive multiple of downsample");
  if (max_decode_len < 1) throw ConfigError("max_decode_len must be >= 1");
  if (max_text_len < 1) throw ConfigError("max_text_len must be >= 1");
  if (vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
  if (ffn_mult < 1) throw ConfigError("ffn_mult must be >= 1");
  if (text_layers < 0 || fusion_layers < 0 || decoder_layers < 1)
    throw ConfigError("layer counts out of range (decoder needs >= 1 layer)");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"d_model", c.d_model},
                     {"image_h", c.image_h},
                     {"image_w", c.image_w},
                     {"downsample", c.downsample},
                     {"conv_channels", c.conv_channels},
                     {"text_layers", c.text_layers},
                     {"text_heads", c.text_heads},
                     {"fusion_layers", c.fusion_layers},
                     {"fusion_heads", c.fusion_heads},
                     {"decoder_layers", c.decoder_layers},
                     {"decoder_heads", c.decoder_heads},
                     {"ffn_mult", c.ffn_mult},
                     {"vocab_size", c.vocab_size},
                     {"max_text_len", c.max_text_len},
                     {"max_decode_len", c.max_decode_len},
                     {"fusion_kind", to_string(c.fusion_kind)},
                     {"init_scale", c.init_scale},
                     {"ln_eps", c.ln_eps}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.d_model = j.value("d_model", d.d_model);
  c.image_h = j.value("image_h", d.image_h);
  c.image_w = j.value("image_w", d.image_w);
  c.downsample = j.value("downsample", d.downsample);
  c.conv_channels = j.value("conv_channels", d.conv_channels);
  c.text_layers = j.value("text_layers", d.text_layers);
  c.text_heads = j.value("text_heads", d.text_heads);
  c.fusion_layers = j.value("fusion_layers", d.fusion_layers);
  c.fusion_heads = j.value("fusion_heads", d.fusion_heads);
  c.decoder_layers = j.value("decoder_layers", d.decoder_layers);
  c.decoder_heads = j.value("decoder_heads", d.decoder_heads);
  c.ffn_mult = j.value("ffn_mult", d.ffn_mult);
  c.vocab_size = j.value("vocab_size", d.vocab_size);
  c.max_text_len = j.value("max_text_len", d.max_text_len);
  c.max_decode_len = j.value("max_decode_len", d.max_decode_len);
  c.fusion_kind = fusion_kind_from_string(j.value("fusion_kind", to_string(d.fusion_kind)));
  c.init_scale = j.value("init_scale", d.init_scale);
  c.ln_eps = j.value("ln_eps", d.ln_eps);
}

// ---------------------------------------------------------------------------
// construction
// ---------------------------------------------------------------------------

Parameter* Model::add_param(const std::string& name, std::vector<int> shape, double stddev,
                            Rng& rng) {
  Tensor t(std::move(shape));
  if (stddev > 0.0)
    for (int i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, stddev);
  params_.push_back(std::make_unique<Parameter>(name, std::move(t)));
  param_ptrs_.push_back(params_.back().get());
  return params_.back().get();
}

Model::Attn Model::make_attn(const std::string& prefix, int heads, int bias_buckets, Rng& rng) {
  Attn a;
  a.heads = heads;
  int d = cfg_.d_model;
  double sd = cfg_.init_scale / std::sqrt(static_cast<double>(d));
  a.wq = add_param(prefix + ".wq", {d, d}, sd, rng);
  a.wk = add_param(prefix + ".wk", {d, d}, sd, rng);
  a.wv = add_param(prefix + ".wv", {d, d}, sd, rng);
  a.wo = add_param(prefix + ".wo", {d, d}, sd, rng);
  if (bias_buckets > 0)
    a.bias_table = add_param(prefix + ".bias_table", {bias_buckets, heads}, 0.0, rng);
  return a;
}

Model::Ln Model::make_ln(const std::string& prefix, Rng& rng) {
  Ln l;
  l.gain = add_param(prefix + ".gain", {cfg_.d_model}, 0.0, rng);
  l.gain->value.fill(1.0);
  l.bias = add_param(prefix + ".bias", {cfg_.d_model}, 0.0, rng);
  return l;
}

Model::Ffn Model::make_ffn(const std::string& prefix, Rng& rng) {
  Ffn f;
  int d = cfg_.d_model, h = cfg_.d_model * cfg_.ffn_mult;
  f.w1 = add_param(prefix + ".w1", {d, h}, cfg_.init_scale / std::sqrt(static_cast<double>(d)),
                   rng);
  f.w2 = add_param(prefix + ".w2", {h, d}, cfg_.init_scale / std::sqrt(static_cast<double>(h)),
                   rng);
  return f;
}

Model::Model(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(derive_seed(seed, "model-init"));
  int d = cfg_.d_model;

  tok_embed_ = add_param("embed.tok", {cfg_.vocab_size, d}, cfg_.init_scale, rng);

  int cin = 3;
  std::vector<int> widths = cfg_.conv_channels;
  widths.push_back(d);
  for (size_t b = 0; b < widths.size(); ++b) {
    ConvBlock cb;
    cb.kernel = add_param("img.conv" + std::to_string(b) + ".kernel", {3, 3, cin, widths[b]},
                          cfg_.init_scale / std::sqrt(9.0 * cin), rng);
    cb.bias = add_param("img.conv" + std::to_string(b) + ".bias", {widths[b]}, 0.0, rng);
    conv_.push_back(cb);
    cin = widths[b];
  }
  grid_ln_ = make_ln("img.ln", rng);

  for (int l = 0; l < cfg_.text_layers; ++l) {
    EncLayer el;
    std::string p = "text.l" + std::to_string(l);
    el.ln1 = make_ln(p + ".ln1", rng);
    el.attn = make_attn(p + ".attn", cfg_.text_heads, text_bucket_count(), rng);
    el.ln2 = make_ln(p + ".ln2", rng);
    el.ffn = make_ffn(p + ".ffn", rng);
    text_layers_.push_back(el);
  }
  text_ln_f_ = make_ln("text.ln_f", rng);

  if (cfg_.fusion_kind == FusionKind::concat_encoder) {
    for (int l = 0; l < cfg_.fusion_layers; ++l) {
      EncLayer el;
      std::string p = "fusion.l" + std::to_string(l);
      el.ln1 = make_ln(p + ".ln1", rng);
      el.attn = make_attn(p + ".attn", cfg_.fusion_heads, fusion_bucket_count(), rng);
      el.ln2 = make_ln(p + ".ln2", rng);
      el.ffn = make_ffn(p + ".ffn", rng);
      fusion_layers_.push_back(el);
    }
  } else {
    for (int l = 0; l < cfg_.fusion_layers; ++l) {
      XLayer xl;
      std::string p = "fusion.x" + std::to_string(l);
      xl.ln1 = make_ln(p + ".ln1", rng);
      xl.self_attn = make_attn(p + ".self", cfg_.fusion_heads, text_bucket_count(), rng);
      xl.ln2 = make_ln(p + ".ln2", rng);
      xl.cross_attn = make_attn(p + ".cross", cfg_.fusion_heads, 0, rng);
      xl.ln3 = make_ln(p + ".ln3", rng);
      xl.ffn = make_ffn(p + ".ffn", rng);
      xfusion_layers_.push_back(xl);
    }
  }
  fusion_ln_f_ = make_ln("fusion.ln_f", rng);

  for (int l = 0; l < cfg_.decoder_layers; ++l) {
    XLayer xl;
    std::string p = "dec.l" + std::to_string(l);
    xl.ln1 = make_ln(p + ".ln1", rng);
    xl.self_attn = make_attn(p + ".self", cfg_.decoder_heads, decoder_bucket_count(), rng);
    xl.ln2 = make_ln(p + ".ln2", rng);
    xl.cross_attn = make_attn(p + ".cross", cfg_.decoder_heads, 0, rng);
    xl.ln3 = make_ln(p + ".ln3", rng);
    xl.ffn = make_ffn(p + ".ffn", rng);
    dec_layers_.push_back(xl);
  }
  dec_ln_f_ = make_ln("dec.ln_f", rng);
  out_proj_ = add_param("out.proj", {d, cfg_.vocab_size},
                        0.5 * cfg_.init_scale / std::sqrt(static_cast<double>(d)), rng);
}

Parameter* Model::find_parameter(const std::string& name) const {
  for (Parameter* p : param_ptrs_)
    if (p->name == name) return p;
  return nullptr;
}

long Model::parameter_count() const {
  long n = 0;
  for (const Parameter* p : param_ptrs_) n += p->value.size();
  return n;
}

void Model::copy_parameters_from(const Model& other) {
  if (!(cfg_ == other.cfg_))
    throw ConfigError("copy_parameters_from: model configurations differ");
  for (size_t i = 0; i < param_ptrs_.size(); ++i) {
    if (param_ptrs_[i]->name != other.param_ptrs_[i]->name)
      throw ConfigError("copy_parameters_from: parameter order mismatch");
    param_ptrs_[i]->value = other.param_ptrs_[i]->value;
  }
}

// ---------------------------------------------------------------------------
// position buckets
// ---------------------------------------------------------------------------

namespace {
int clamp_offset(int delta, int max_len) {
  return std::clamp(delta, -(max_len - 1), max_len - 1) + (max_len - 1);
}
}  // namespace

IntMat Model::text_buckets(int len) const {
  IntMat b(len, len);
  for (int i = 0; i < len; ++i)
    for (int j = 0; j < len; ++j) b.at(i, j) = clamp_offset(j - i, cfg_.max_text_len);
  return b;
}

IntMat Model::decoder_buckets(int len) const {
  IntMat b(len, len);
  for (int i = 0; i < len; ++i)
    for (int j = 0; j < len; ++j) b.at(i, j) = clamp_offset(j - i, cfg_.max_decode_len);
  return b;
}

int Model::fusion_bucket_count() const {
  int n2d = (2 * cfg_.grid_h() - 1) * (2 * cfg_.grid_w() - 1);
  return n2d + text_bucket_count() + 1;  // + one cross-segment scalar
}

IntMat Model::fusion_buckets(const std::vector<Segment>& segments) const {
  int H = cfg_.grid_h(), W = cfg_.grid_w();
  int n2d = (2 * H - 1) * (2 * W - 1);
  int cross = n2d + text_bucket_count();
  int S = static_cast<int>(segments.size());

  // (segment, row, col) for image tokens; (segment, textpos) for text.
  struct Pos {
    Segment seg;
    int a, b;
  };
  std::vector<Pos> pos(static_cast<size_t>(S));
  int img_seen = 0, txt_seen = 0;
  for (int i = 0; i < S; ++i) {
    if (segments[static_cast<size_t>(i)] == Segment::text) {
      pos[static_cast<size_t>(i)] = {Segment::text, txt_seen++, 0};
    } else {
      int within = img_seen % (H * W);
      pos[static_cast<size_t>(i)] = {segments[static_cast<size_t>(i)], within / W, within % W};
      ++img_seen;
    }
  }
  IntMat bk(S, S);
  for (int i = 0; i < S; ++i)
    for (int j = 0; j < S; ++j) {
      const Pos& pi = pos[static_cast<size_t>(i)];
      const Pos& pj = pos[static_cast<size_t>(j)];
      if (pi.seg == Segment::text && pj.seg == Segment::text) {
        bk.at(i, j) = n2d + clamp_offset(pj.a - pi.a, cfg_.max_text_len);
      } else if (pi.seg == pj.seg) {
        int dr = pj.a - pi.a + (H - 1);
        int dc = pj.b - pi.b + (W - 1);
        bk.at(i, j) = dr * (2 * W - 1) + dc;
      } else {
        bk.at(i, j) = cross;
      }
    }
  return bk;
}

// ---------------------------------------------------------------------------
// forward pieces
// ---------------------------------------------------------------------------

Var Model::ln_apply(Graph& g, Var x, const Ln& l) const {
  return layernorm(x, g.param(*l.gain), g.param(*l.bias), cfg_.ln_eps);
}

Var Model::ffn_apply(Graph& g, Var x, const Ffn& f) const {
  return matmul(gelu(matmul(x, g.param(*f.w1))), g.param(*f.w2));
}

Var Model::attention(Graph& g, Var q_in, Var kv_in, const Attn& p, const IntMat* buckets,
                     const Tensor* add_mask) const {
  int d = cfg_.d_model;
  int dh = d / p.heads;
  Var q = matmul(q_in, g.param(*p.wq));
  Var k = matmul(kv_in, g.param(*p.wk));
  Var v = matmul(kv_in, g.param(*p.wv));
  Var mask_var;
  if (add_mask != nullptr) mask_var = g.constant(*add_mask);
  std::vector<Var> heads;
  heads.reserve(static_cast<size_t>(p.heads));
  for (int h = 0; h < p.heads; ++h) {
    Var qh = slice_cols(q, h * dh, dh);
    Var kh = slice_cols(k, h * dh, dh);
    Var vh = slice_cols(v, h * dh, dh);
    Var scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dh)));
    if (buckets != nullptr && p.bias_table != nullptr)
      scores = add(scores, rel_bias(g.param(*p.bias_table), *buckets, h));
    if (add_mask != nullptr) scores = add(scores, mask_var);
    heads.push_back(matmul(softmax_rows(scores), vh));
  }
  return matmul(concat_cols(heads), g.param(*p.wo));
}

Var Model::enc_layer(Graph& g, Var x, const EncLayer& l, const IntMat& buckets) const {
  Var h = ln_apply(g, x, l.ln1);
  x = add(x, attention(g, h, h, l.attn, &buckets, nullptr));
  x = add(x, ffn_apply(g, ln_apply(g, x, l.ln2), l.ffn));
  return x;
}

Var Model::image_features(Graph& g, Var pixels) const {
  const Tensor& t = pixels.value();
  if (t.ndim() != 3 || t.dim(0) != cfg_.image_h || t.dim(1) != cfg_.image_w || t.dim(2) != 3)
    throw DimensionError("image_features: expected [" + std::to_string(cfg_.image_h) + "x" +
                         std::to_string(cfg_.image_w) + "x3] pixels, got " + t.shape_str());
  Var x = pixels;
  for (size_t b = 0; b < conv_.size(); ++b) {
    x = conv2d(x, g.param(*conv_[b].kernel), g.param(*conv_[b].bias), 2, 1);
    if (b + 1 < conv_.size()) x = gelu(x);
  }
  int hw = cfg_.grid_h() * cfg_.grid_w();
  x = reshape(x, {hw, cfg_.d_model});
  return ln_apply(g, x, grid_ln_);
}

Var Model::encode_image(Graph& g, const Image& image) const {
  if (image.h != cfg_.image_h || image.w != cfg_.image_w)
    throw DimensionError("encode_image: expected " + std::to_string(cfg_.image_h) + "x" +
                         std::to_string(cfg_.image_w) + " image, got " +
                         std::to_string(image.h) + "x" + std::to_string(image.w));
  Tensor pix({image.h, image.w, 3});
  for (int i = 0; i < pix.size(); ++i)
    pix[i] = static_cast<double>(image.rgb[static_cast<size_t>(i)]) / 255.0;
  return image_features(g, g.constant(std::move(pix)));
}

Var Model::encode_text(Graph& g, const std::vector<int>& ids) const {
  if (static_cast<int>(ids.size()) > cfg_.max_text_len)
    throw DimensionError("encode_text: sequence of " + std::to_string(ids.size()) +
                         " tokens exceeds max_text_len " + std::to_string(cfg_.max_text_len));
  if (ids.empty()) return g.constant(Tensor({0, cfg_.d_model}));
  Var x = embed_rows(g.param(*tok_embed_), ids);
  IntMat buckets = text_buckets(static_cast<int>(ids.size()));
  for (const EncLayer& l : text_layers_) x = enc_layer(g, x, l, buckets);
  return ln_apply(g, x, text_ln_f_);
}

FusedSeq Model::fuse(Graph& g, const std::vector<Var>& grids, Var text) const {
  return cfg_.fusion_kind == FusionKind::concat_encoder ? fuse_concat(g, grids, text)
                                                        : fuse_xattn(g, grids, text);
}

namespace {
void check_grids(const std::vector<Var>& grids, int hw, int d) {
  if (grids.empty() || grids.size() > 2)
    throw DimensionError("fuse: expected 1 or 2 feature grids, got " +
                         std::to_string(grids.size()));
  for (const Var& v : grids) {
    const Tensor& t = v.value();
    if (t.ndim() != 2 || t.rows() != hw || t.cols() != d)
      throw DimensionError("fuse: feature grid shape " + t.shape_str() +
                           " does not match the configured " + std::to_string(hw) + "x" +
                           std::to_string(d));
  }
}
}  // namespace

FusedSeq Model::fuse_concat(Graph& g, const std::vector<Var>& grids, Var text) const {
  if (cfg_.fusion_kind != FusionKind::concat_encoder)
    throw ConfigError("fuse_concat invoked under fusion_kind encoder_decoder");
  int hw = cfg_.grid_h() * cfg_.grid_w();
  check_grids(grids, hw, cfg_.d_model);
  const Tensor& tt = text.value();
  if (tt.ndim() != 2 || tt.cols() != cfg_.d_model)
    throw DimensionError("fuse: text features " + tt.shape_str() + " mismatch d_model");

  FusedSeq fs;
  for (size_t k = 0; k < grids.size(); ++k)
    for (int i = 0; i < hw; ++i)
      fs.segments.push_back(k == 0 ? Segment::image_1 : Segment::image_2);
  for (int i = 0; i < tt.rows(); ++i) fs.segments.push_back(Segment::text);

  std::vector<Var> parts(grids.begin(), grids.end());
  parts.push_back(text);
  Var x = concat_rows(parts);
  if (!fusion_layers_.empty()) {
    IntMat buckets = fusion_buckets(fs.segments);
    for (const EncLayer& l : fusion_layers_) x = enc_layer(g, x, l, buckets);
    x = ln_apply(g, x, fusion_ln_f_);
  }
  fs.features = x;
  return fs;
}

FusedSeq Model::fuse_xattn(Graph& g, const std::vector<Var>& grids, Var text) const {
  if (cfg_.fusion_kind != FusionKind::encoder_decoder)
    throw ConfigError("fuse_xattn invoked under fusion_kind concat_encoder");
  int hw = cfg_.grid_h() * cfg_.grid_w();
  check_grids(grids, hw, cfg_.d_model);
  const Tensor& tt = text.value();
  if (tt.ndim() != 2 || tt.cols() != cfg_.d_model)
    throw DimensionError("fuse: text features " + tt.shape_str() + " mismatch d_model");

  Var memory = grids.size() == 1 ? grids[0] : concat_rows({grids[0], grids[1]});
  Var x = text;
  int L = tt.rows();
  if (!xfusion_layers_.empty() && L > 0) {
    IntMat buckets = text_buckets(L);
    for (const XLayer& l : xfusion_layers_) {
      Var h = ln_apply(g, x, l.ln1);
      x = add(x, attention(g, h, h, l.self_attn, &buckets, nullptr));
      x = add(x, attention(g, ln_apply(g, x, l.ln2), memory, l.cross_attn, nullptr, nullptr));
      x = add(x, ffn_apply(g, ln_apply(g, x, l.ln3), l.ffn));
    }
    x = ln_apply(g, x, fusion_ln_f_);
  }
  FusedSeq fs;
  fs.features = x;
  fs.segments.assign(static_cast<size_t>(L), Segment::text);
  return fs;
}

Var Model::decoder_logits(Graph& g, const FusedSeq& memory, const std::vector<int>& dec_input) const {
  int T = static_cast<int>(dec_input.size());
  if (T < 1) throw DimensionError("decoder_logits: empty decoder input");
  if (T > cfg_.max_decode_len)
    throw DimensionError("decoder_logits: length " + std::to_string(T) +
                         " exceeds max_decode_len " + std::to_string(cfg_.max_decode_len));
  Var x = embed_rows(g.param(*tok_embed_), dec_input);
  IntMat buckets = decoder_buckets(T);
  Tensor mask({T, T});
  for (int i = 0; i < T; ++i)
    for (int j = i + 1; j < T; ++j) mask.at(i, j) = -1e9;
  for (const XLayer& l : dec_layers_) {
    Var h = ln_apply(g, x, l.ln1);
    x = add(x, attention(g, h, h, l.self_attn, &buckets, &mask));
    x = add(x, attention(g, ln_apply(g, x, l.ln2), memory.features, l.cross_attn, nullptr,
                         nullptr));
    x = add(x, ffn_apply(g, ln_apply(g, x, l.ln3), l.ffn));
  }
  x = ln_apply(g, x, dec_ln_f_);
  return matmul(x, g.param(*out_proj_));
}

Var Model::decode_step(Graph& g, const FusedSeq& memory, const std::vector<int>& prefix) const {
  if (static_cast<int>(prefix.size()) >= cfg_.max_decode_len)
    throw DimensionError("decode_step: prefix of " + std::to_string(prefix.size()) +
                         " tokens overflows max_decode_len " +
                         std::to_string(cfg_.max_decode_len));
  std::vector<int> dec_input;
  dec_input.push_back(Vocab::kPad);  // decoder start token
  dec_input.insert(dec_input.end(), prefix.begin(), prefix.end());
  Var logits = decoder_logits(g, memory, dec_input);
  Var last = slice_cols(transpose(logits), static_cast<int>(dec_input.size()) - 1, 1);
  return reshape(transpose(last), {cfg_.vocab_size});
}

std::vector<int> Model::generate_greedy(Graph& g, const FusedSeq& memory, int max_len) const {
  if (max_len < 1) throw ConfigError("generate_greedy: max_len must be >= 1");
  max_len = std::min(max_len, cfg_.max_decode_len - 1);
  std::vector<int> out;
  for (int step = 0; step < max_len; ++step) {
    Var logits = decode_step(g, memory, out);
    const Tensor& row = logits.value();
    int best = 0;
    for (int v = 1; v < row.size(); ++v)
      if (row[v] > row[best]) best = v;  // ties keep the lowest id
    if (best == Vocab::kEos) break;
    out.push_back(best);
  }
  return out;
}

Var Model::forward_loss(Graph& g, std::span<const TaskExample* const> batch,
                        const Vocab& vocab) const {
  if (batch.empty()) throw DataError("forward_loss: empty batch");
  if (vocab.size() != cfg_.vocab_size)
    throw ConfigError("forward_loss: vocabulary size " + std::to_string(vocab.size()) +
                      " does not match model config " + std::to_string(cfg_.vocab_size));
  std::vector<Var> logit_blocks;
  std::vector<int> labels;
  for (const TaskExample* e : batch) {
    if (e->images.empty() || e->images.size() > 2)
      throw DataError("forward_loss: example must hold 1 or 2 images");
    if (e->target_text.empty()) throw DataError("forward_loss: empty target text");
    std::vector<Var> grids;
    for (const Image& im : e->images) grids.push_back(encode_image(g, im));
    Var text = encode_text(g, encode(e->input_text, vocab, true));
    FusedSeq fused = fuse(g, grids, text);

    std::vector<int> target_ids = encode(e->target_text, vocab, true);  // ends with EOS
    if (static_cast<int>(target_ids.size()) > cfg_.max_decode_len)
      throw DataError("forward_loss: target '" + e->target_text + "' exceeds max_decode_len");
    std::vector<int> dec_input;
    dec_input.push_back(Vocab::kPad);
    dec_input.insert(dec_input.end(), target_ids.begin(), target_ids.end() - 1);
    logit_blocks.push_back(decoder_logits(g, fused, dec_input));
    labels.insert(labels.end(), target_ids.begin(), target_ids.end());
  }
  Var all = logit_blocks.size() == 1 ? logit_blocks[0] : concat_rows(logit_blocks);
  return softmax_cross_entropy(all, labels, Vocab::kPad);
}

Var Model::forward_loss(Graph& g, const std::vector<TaskExample>& batch,
                        const Vocab& vocab) const {
  std::vector<const TaskExample*> ptrs;
  ptrs.reserve(batch.size());
  for (const TaskExample& e : batch) ptrs.push_back(&e);
  return forward_loss(g, ptrs, vocab);
}

std::string Model::answer(const TaskExample& e, const Vocab& vocab, int max_len) const {
  if (max_len < 0) max_len = cfg_.max_decode_len - 1;
  Graph g(false);
  std::vector<Var> grids;
  for (const Image& im : e.images) grids.push_back(encode_image(g, im));
  Var text = encode_text(g, encode(e.input_text, vocab, true));
  FusedSeq fused = fuse(g, grids, text);
  return decode(generate_greedy(g, fused, max_len), vocab);
}

}  // namespace vqamix
