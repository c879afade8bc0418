#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adam.hpp"
#include "grid.hpp"
#include "tape.hpp"
#include "tensor.hpp"

namespace gridvit {

// Which input configuration the classifier is wired for. t1/t2/early are a
// single encoder tower (C = 1, 1, 2 respectively); late runs one C = 1
// tower per modality and classifies the concatenated class tokens.
enum class FusionMode { t1, t2, early, late };

std::string fusion_name(FusionMode m);
FusionMode fusion_from_name(const std::string& s);

struct ModelConfig {
  int k = 9;             // slices per grid, perfect square
  int slice_h = 64;
  int slice_w = 64;
  int patch_size = 16;   // P
  int embed_dim = 192;   // D
  int layers = 6;        // L
  int heads = 3;
  int mlp_ratio = 4;
  int num_classes = 3;
  FusionMode fusion = FusionMode::early;

  int channels() const { return fusion == FusionMode::early ? 2 : 1; }
  int grid_h() const;                     // sqrt(k) * slice_h
  int grid_w() const;
  int patch_count() const;                // N = k*H*W / P^2
  int tokens() const { return patch_count() + 1; }
  int patch_dim() const { return patch_size * patch_size * channels(); }
  int head_dim() const { return embed_dim / heads; }
  int mlp_hidden() const { return mlp_ratio * embed_dim; }
  // Readout width in front of the classification head: D, or 2D for late.
  int readout_dim() const {
    return fusion == FusionMode::late ? 2 * embed_dim : embed_dim;
  }

  void validate() const;
};

nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

// One encoder tower: patch embedding, positional encodings, class token,
// L pre-norm encoder layers, and a final layer norm.
template <class S>
struct TowerParamsT {
  TensorT<S> embed;        // (P^2*C) x D
  TensorT<S> pos;          // (N+1) x D
  TensorT<S> class_token;  // D

  struct Layer {
    TensorT<S> ln1_gamma, ln1_beta;
    TensorT<S> wq, bq, wk, bk, wv, bv, wo, bo;  // D x D projections + biases
    TensorT<S> ln2_gamma, ln2_beta;
    TensorT<S> w1, b1, w2, b2;  // D -> mlp_ratio*D -> D
  };
  std::vector<Layer> layers;

  TensorT<S> final_ln_gamma, final_ln_beta;
};

// Full classifier: one tower (t1/t2/early) or two (late), plus the linear
// head mapping the readout to class scores.
template <class S>
struct ModelParamsT {
  TowerParamsT<S> tower;
  std::optional<TowerParamsT<S>> tower2;  // late fusion only
  TensorT<S> head_w;  // readout_dim x num_classes
  TensorT<S> head_b;  // num_classes

  template <class T>
  ModelParamsT<T> cast() const;
};

using TowerParams = TowerParamsT<float>;
using ModelParams = ModelParamsT<float>;

// Fixed iteration order over (name, tensor). This order defines the
// checkpoint layout, the optimizer state layout, and the census. TP deduces
// as TowerParamsT<S> or const TowerParamsT<S>.
template <class TP, class F>
void for_each_tower_param(TP& t, const std::string& prefix, F&& fn) {
  fn(prefix + "embed", t.embed);
  fn(prefix + "pos", t.pos);
  fn(prefix + "class_token", t.class_token);
  for (std::size_t i = 0; i < t.layers.size(); ++i) {
    auto& L = t.layers[i];
    const std::string lp = prefix + "layer" + std::to_string(i) + ".";
    fn(lp + "ln1.gamma", L.ln1_gamma);
    fn(lp + "ln1.beta", L.ln1_beta);
    fn(lp + "attn.wq", L.wq);
    fn(lp + "attn.bq", L.bq);
    fn(lp + "attn.wk", L.wk);
    fn(lp + "attn.bk", L.bk);
    fn(lp + "attn.wv", L.wv);
    fn(lp + "attn.bv", L.bv);
    fn(lp + "attn.wo", L.wo);
    fn(lp + "attn.bo", L.bo);
    fn(lp + "ln2.gamma", L.ln2_gamma);
    fn(lp + "ln2.beta", L.ln2_beta);
    fn(lp + "mlp.w1", L.w1);
    fn(lp + "mlp.b1", L.b1);
    fn(lp + "mlp.w2", L.w2);
    fn(lp + "mlp.b2", L.b2);
  }
  fn(prefix + "final_ln.gamma", t.final_ln_gamma);
  fn(prefix + "final_ln.beta", t.final_ln_beta);
}

template <class MP, class F>
void for_each_param(MP& p, F&& fn) {
  const bool late = p.tower2.has_value();
  for_each_tower_param(p.tower, late ? "tower1." : "", fn);
  if (late) for_each_tower_param(*p.tower2, "tower2.", fn);
  fn(std::string("head.weight"), p.head_w);
  fn(std::string("head.bias"), p.head_b);
}

std::vector<NamedParam> param_refs(ModelParams& p);

// All-zero parameter set with the shapes the config dictates.
ModelParams zero_params(const ModelConfig& c);

// Closed-form parameter census for a config; see init_params. Verified by
// enumeration in the test suite.
std::int64_t param_census(const ModelConfig& c);

// Truncated-normal (std 0.02) projections and positional encodings, zero
// biases and class token.
ModelParams init_params(const ModelConfig& c, std::uint64_t seed);

// Per-layer, per-head row-stochastic attention matrices recorded during a
// forward pass; layout [layer][head], each (N+1) x (N+1).
struct AttentionStack {
  int layers = 0;
  int heads = 0;
  int tokens = 0;
  std::vector<Tensor> mats;

  const Tensor& at(int layer, int head) const {
    return mats[static_cast<std::size_t>(layer * heads + head)];
  }
};

struct Logits {
  Tensor scores;  // num_classes
  int argmax() const;
};

// ---- plain forward surface -------------------------------------------------

// Splits an image into N flattened patch vectors, row-major over the patch
// grid, each flattened in (row, col, channel) order.
template <class S>
TensorT<S> patchify(const TensorT<S>& image, int patch_size);

// Inverse of patchify, for a {h, w, c} target shape.
template <class S>
TensorT<S> unpatchify(const TensorT<S>& patches, int h, int w, int c,
                      int patch_size);

// z0 = [class; x_p^1 E; ...; x_p^N E] + pos.
Tensor build_token_sequence(const Tensor& patches, const TowerParams& tower);

// z' = MSA(LN(z)) + z; out = MLP(LN(z')) + z'. Optionally records the
// per-head attention matrices.
Tensor encoder_layer(const Tensor& z, const TowerParams::Layer& layer,
                     int heads, std::vector<Tensor>* recorded = nullptr);

struct ForwardResult {
  Logits logits;
  std::optional<AttentionStack> attention;
  std::optional<AttentionStack> attention2;  // second tower, late fusion only
};

// Single-tower classification of an image whose channel count matches the
// config. For late fusion use forward_late_fusion or classify_scan.
ForwardResult forward_classify(const Tensor& image, const ModelParams& params,
                               const ModelConfig& config, bool record = false);

// Two C = 1 towers; their final-LN class tokens are concatenated to length
// 2D and classified by the fusion head.
ForwardResult forward_late_fusion(const Tensor& t1_grid, const Tensor& t2_grid,
                                  const ModelParams& params,
                                  const ModelConfig& config,
                                  bool record = false);

// Routes a fused C = 2 sample through whichever path config.fusion selects.
ForwardResult classify_scan(const GridSample& fused, const ModelParams& params,
                            const ModelConfig& config, bool record = false);

// ---- tape builders (training / gradient checking) ---------------------------

template <class S>
struct TowerLeaves {
  typename TapeT<S>::Id embed, pos, class_token;
  struct Layer {
    typename TapeT<S>::Id ln1_gamma, ln1_beta, wq, bq, wk, bk, wv, bv, wo, bo,
        ln2_gamma, ln2_beta, w1, b1, w2, b2;
  };
  std::vector<Layer> layers;
  typename TapeT<S>::Id final_ln_gamma, final_ln_beta;
};

template <class S>
struct ModelLeaves {
  TowerLeaves<S> tower;
  std::optional<TowerLeaves<S>> tower2;
  typename TapeT<S>::Id head_w, head_b;
  // Leaf ids in for_each_param order, for gradient extraction.
  std::vector<typename TapeT<S>::Id> ordered;
};

template <class S>
ModelLeaves<S> make_leaves(TapeT<S>& tape, const ModelParamsT<S>& params,
                           bool needs_grad);

// Wires already-created leaf ids (in for_each_param order, e.g. from
// grad_check) into the model structure.
template <class S>
ModelLeaves<S> wire_leaves(const ModelParamsT<S>& params,
                           const std::vector<typename TapeT<S>::Id>& ordered);

// Encodes patches through one tower; returns the 1 x D final-LN class token.
template <class S>
typename TapeT<S>::Id encode_tower(TapeT<S>& tape, const TowerLeaves<S>& tower,
                                   typename TapeT<S>::Id patches,
                                   const ModelConfig& config,
                                   std::vector<typename TapeT<S>::Id>* attn_ids);

// Full classification: 1 x num_classes logits for one sample.
template <class S>
typename TapeT<S>::Id classify_on_tape(TapeT<S>& tape, const ModelLeaves<S>& leaves,
                                       const GridSample& fused,
                                       const ModelConfig& config,
                                       std::vector<typename TapeT<S>::Id>* attn_ids);

// Patch matrices for each tower the mode needs (1 or 2 entries).
std::vector<Tensor> tower_patch_inputs(const GridSample& fused,
                                       const ModelConfig& config);

}  // namespace gridvit
