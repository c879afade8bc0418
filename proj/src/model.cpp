#include "model.hpp"

#include <cmath>
#include <unordered_map>

#include "error.hpp"
#include "rng.hpp"

namespace gridvit {

std::string fusion_name(FusionMode m) {
  switch (m) {
    case FusionMode::t1: return "t1";
    case FusionMode::t2: return "t2";
    case FusionMode::early: return "early";
    case FusionMode::late: return "late";
  }
  return "early";
}

FusionMode fusion_from_name(const std::string& s) {
  if (s == "t1") return FusionMode::t1;
  if (s == "t2") return FusionMode::t2;
  if (s == "early") return FusionMode::early;
  if (s == "late") return FusionMode::late;
  fail(ErrorCode::config, "fusion mode '" + s + "' is not one of t1|t2|early|late");
}

int ModelConfig::grid_h() const { return grid_side(k) * slice_h; }
int ModelConfig::grid_w() const { return grid_side(k) * slice_w; }

int ModelConfig::patch_count() const {
  return (grid_h() / patch_size) * (grid_w() / patch_size);
}

void ModelConfig::validate() const {
  grid_side(k);  // k must be a perfect square
  if (slice_h < 1 || slice_w < 1) {
    fail(ErrorCode::config, "slice extents must be >= 1");
  }
  if (patch_size < 1 || grid_h() % patch_size != 0 || grid_w() % patch_size != 0) {
    fail(ErrorCode::config,
         "grid " + std::to_string(grid_h()) + "x" + std::to_string(grid_w()) +
             " is not divisible by patch size " + std::to_string(patch_size));
  }
  if (embed_dim < 1 || heads < 1 || embed_dim % heads != 0) {
    fail(ErrorCode::config,
         "embed_dim " + std::to_string(embed_dim) +
             " must be divisible by heads " + std::to_string(heads));
  }
  if (layers < 1 || mlp_ratio < 1 || num_classes < 2) {
    fail(ErrorCode::config, "layers/mlp_ratio/num_classes out of range");
  }
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
  return nlohmann::json{
      {"k", c.k},
      {"slice_h", c.slice_h},
      {"slice_w", c.slice_w},
      {"patch_size", c.patch_size},
      {"embed_dim", c.embed_dim},
      {"layers", c.layers},
      {"heads", c.heads},
      {"mlp_ratio", c.mlp_ratio},
      {"num_classes", c.num_classes},
      {"fusion", fusion_name(c.fusion)},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    if (j.contains("k")) c.k = j.at("k").get<int>();
    if (j.contains("slice_h")) c.slice_h = j.at("slice_h").get<int>();
    if (j.contains("slice_w")) c.slice_w = j.at("slice_w").get<int>();
    if (j.contains("patch_size")) c.patch_size = j.at("patch_size").get<int>();
    if (j.contains("embed_dim")) c.embed_dim = j.at("embed_dim").get<int>();
    if (j.contains("layers")) c.layers = j.at("layers").get<int>();
    if (j.contains("heads")) c.heads = j.at("heads").get<int>();
    if (j.contains("mlp_ratio")) c.mlp_ratio = j.at("mlp_ratio").get<int>();
    if (j.contains("num_classes")) c.num_classes = j.at("num_classes").get<int>();
    if (j.contains("fusion")) c.fusion = fusion_from_name(j.at("fusion").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::config, std::string("bad model config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

template <class S>
TowerParamsT<S> zero_tower(const ModelConfig& c) {
  TowerParamsT<S> t;
  const int d = c.embed_dim;
  t.embed = TensorT<S>({c.patch_dim(), d});
  t.pos = TensorT<S>({c.tokens(), d});
  t.class_token = TensorT<S>({d});
  t.layers.resize(static_cast<std::size_t>(c.layers));
  for (auto& L : t.layers) {
    L.ln1_gamma = TensorT<S>({d});
    L.ln1_beta = TensorT<S>({d});
    L.wq = TensorT<S>({d, d});
    L.bq = TensorT<S>({d});
    L.wk = TensorT<S>({d, d});
    L.bk = TensorT<S>({d});
    L.wv = TensorT<S>({d, d});
    L.bv = TensorT<S>({d});
    L.wo = TensorT<S>({d, d});
    L.bo = TensorT<S>({d});
    L.ln2_gamma = TensorT<S>({d});
    L.ln2_beta = TensorT<S>({d});
    L.w1 = TensorT<S>({d, c.mlp_hidden()});
    L.b1 = TensorT<S>({c.mlp_hidden()});
    L.w2 = TensorT<S>({c.mlp_hidden(), d});
    L.b2 = TensorT<S>({d});
  }
  t.final_ln_gamma = TensorT<S>({d});
  t.final_ln_beta = TensorT<S>({d});
  return t;
}

// Name-based init kind: gammas start at one, biases / betas / the class
// token at zero, every projection as truncated normal (std 0.02).
enum class InitKind { ones, zeros, trunc_normal };

InitKind init_kind(const std::string& name) {
  auto ends_with = [&name](const char* suffix) {
    const std::string s(suffix);
    return name.size() >= s.size() &&
           name.compare(name.size() - s.size(), s.size(), s) == 0;
  };
  if (ends_with(".gamma")) return InitKind::ones;
  if (ends_with(".beta") || ends_with("class_token") || ends_with(".bq") ||
      ends_with(".bk") || ends_with(".bv") || ends_with(".bo") ||
      ends_with(".b1") || ends_with(".b2") || ends_with("head.bias")) {
    return InitKind::zeros;
  }
  return InitKind::trunc_normal;
}

}  // namespace

ModelParams zero_params(const ModelConfig& c) {
  c.validate();
  ModelParams p;
  p.tower = zero_tower<float>(c);
  if (c.fusion == FusionMode::late) p.tower2 = zero_tower<float>(c);
  p.head_w = Tensor({c.readout_dim(), c.num_classes});
  p.head_b = Tensor({c.num_classes});
  return p;
}

std::vector<NamedParam> param_refs(ModelParams& p) {
  std::vector<NamedParam> refs;
  for_each_param(p, [&refs](const std::string& name, Tensor& t) {
    refs.push_back({name, &t});
  });
  return refs;
}

std::int64_t param_census(const ModelConfig& c) {
  const std::int64_t d = c.embed_dim;
  const std::int64_t r = c.mlp_hidden();
  const std::int64_t per_layer = 2 * d            // ln1 gamma+beta
                                 + 4 * (d * d + d)  // q,k,v,o with biases
                                 + 2 * d            // ln2 gamma+beta
                                 + d * r + r + r * d + d;  // mlp
  const std::int64_t tower = static_cast<std::int64_t>(c.patch_dim()) * d  // embed
                             + static_cast<std::int64_t>(c.tokens()) * d   // pos
                             + d                                           // class token
                             + c.layers * per_layer + 2 * d;               // final ln
  const std::int64_t towers = c.fusion == FusionMode::late ? 2 * tower : tower;
  return towers + static_cast<std::int64_t>(c.readout_dim()) * c.num_classes +
         c.num_classes;
}

ModelParams init_params(const ModelConfig& c, std::uint64_t seed) {
  ModelParams p = zero_params(c);
  for_each_param(p, [seed](const std::string& name, Tensor& t) {
    switch (init_kind(name)) {
      case InitKind::ones:
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = 1.0f;
        break;
      case InitKind::zeros:
        break;
      case InitKind::trunc_normal: {
        Rng rng(Rng::derive(seed, {Rng::hash_str(name)}));
        for (std::size_t i = 0; i < t.size(); ++i)
          t[i] = static_cast<float>(rng.truncated_normal(0.02));
        break;
      }
    }
  });
  return p;
}

int Logits::argmax() const {
  int best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[static_cast<std::size_t>(best)])
      best = static_cast<int>(i);
  }
  return best;
}

template <class S>
TensorT<S> patchify(const TensorT<S>& image, int patch_size) {
  if (image.rank() != 3) {
    fail(ErrorCode::config, "patchify expects a {h,w,c} image, got " +
                                image.shape_str());
  }
  const int h = image.dim(0), w = image.dim(1), c = image.dim(2);
  if (patch_size < 1 || h % patch_size != 0 || w % patch_size != 0) {
    fail(ErrorCode::config, "image " + image.shape_str() +
                                " not divisible by patch size " +
                                std::to_string(patch_size));
  }
  const int ph = h / patch_size, pw = w / patch_size;
  const int n = ph * pw;
  const int dim = patch_size * patch_size * c;
  TensorT<S> out({n, dim});
  for (int pr = 0; pr < ph; ++pr) {
    for (int pc = 0; pc < pw; ++pc) {
      const int p = pr * pw + pc;
      int idx = 0;
      for (int r = 0; r < patch_size; ++r)
        for (int col = 0; col < patch_size; ++col)
          for (int ch = 0; ch < c; ++ch, ++idx)
            out.at(p, idx) =
                image.at(pr * patch_size + r, pc * patch_size + col, ch);
    }
  }
  return out;
}

template <class S>
TensorT<S> unpatchify(const TensorT<S>& patches, int h, int w, int c,
                      int patch_size) {
  const int ph = h / patch_size, pw = w / patch_size;
  if (patches.rank() != 2 || patches.dim(0) != ph * pw ||
      patches.dim(1) != patch_size * patch_size * c) {
    fail(ErrorCode::config, "unpatchify shape mismatch for " + patches.shape_str());
  }
  TensorT<S> out({h, w, c});
  for (int pr = 0; pr < ph; ++pr) {
    for (int pc = 0; pc < pw; ++pc) {
      const int p = pr * pw + pc;
      int idx = 0;
      for (int r = 0; r < patch_size; ++r)
        for (int col = 0; col < patch_size; ++col)
          for (int ch = 0; ch < c; ++ch, ++idx)
            out.at(pr * patch_size + r, pc * patch_size + col, ch) =
                patches.at(p, idx);
    }
  }
  return out;
}

template TensorT<float> patchify<float>(const TensorT<float>&, int);
template TensorT<double> patchify<double>(const TensorT<double>&, int);
template TensorT<float> unpatchify<float>(const TensorT<float>&, int, int, int, int);
template TensorT<double> unpatchify<double>(const TensorT<double>&, int, int, int, int);

namespace {

template <class S>
ModelLeaves<S> wire_from_map(
    const ModelParamsT<S>& params,
    const std::unordered_map<std::string, typename TapeT<S>::Id>& by_name,
    std::vector<typename TapeT<S>::Id> ordered) {
  ModelLeaves<S> leaves;
  leaves.ordered = std::move(ordered);

  auto wire_tower = [&](TowerLeaves<S>& tl, const TowerParamsT<S>& tp,
                        const std::string& prefix) {
    tl.embed = by_name.at(prefix + "embed");
    tl.pos = by_name.at(prefix + "pos");
    tl.class_token = by_name.at(prefix + "class_token");
    tl.layers.resize(tp.layers.size());
    for (std::size_t i = 0; i < tp.layers.size(); ++i) {
      const std::string lp = prefix + "layer" + std::to_string(i) + ".";
      auto& L = tl.layers[i];
      L.ln1_gamma = by_name.at(lp + "ln1.gamma");
      L.ln1_beta = by_name.at(lp + "ln1.beta");
      L.wq = by_name.at(lp + "attn.wq");
      L.bq = by_name.at(lp + "attn.bq");
      L.wk = by_name.at(lp + "attn.wk");
      L.bk = by_name.at(lp + "attn.bk");
      L.wv = by_name.at(lp + "attn.wv");
      L.bv = by_name.at(lp + "attn.bv");
      L.wo = by_name.at(lp + "attn.wo");
      L.bo = by_name.at(lp + "attn.bo");
      L.ln2_gamma = by_name.at(lp + "ln2.gamma");
      L.ln2_beta = by_name.at(lp + "ln2.beta");
      L.w1 = by_name.at(lp + "mlp.w1");
      L.b1 = by_name.at(lp + "mlp.b1");
      L.w2 = by_name.at(lp + "mlp.w2");
      L.b2 = by_name.at(lp + "mlp.b2");
    }
    tl.final_ln_gamma = by_name.at(prefix + "final_ln.gamma");
    tl.final_ln_beta = by_name.at(prefix + "final_ln.beta");
  };

  const bool late = params.tower2.has_value();
  wire_tower(leaves.tower, params.tower, late ? "tower1." : "");
  if (late) {
    leaves.tower2.emplace();
    wire_tower(*leaves.tower2, *params.tower2, "tower2.");
  }
  leaves.head_w = by_name.at("head.weight");
  leaves.head_b = by_name.at("head.bias");
  return leaves;
}

}  // namespace

template <class S>
ModelLeaves<S> make_leaves(TapeT<S>& tape, const ModelParamsT<S>& params,
                           bool needs_grad) {
  std::unordered_map<std::string, typename TapeT<S>::Id> by_name;
  std::vector<typename TapeT<S>::Id> ordered;
  for_each_param(params, [&](const std::string& name, const TensorT<S>& t) {
    typename TapeT<S>::Id id = tape.leaf(t, needs_grad);
    by_name.emplace(name, id);
    ordered.push_back(id);
  });
  return wire_from_map(params, by_name, std::move(ordered));
}

template <class S>
ModelLeaves<S> wire_leaves(const ModelParamsT<S>& params,
                           const std::vector<typename TapeT<S>::Id>& ordered) {
  std::unordered_map<std::string, typename TapeT<S>::Id> by_name;
  std::size_t i = 0;
  for_each_param(params, [&](const std::string& name, const TensorT<S>&) {
    if (i >= ordered.size()) {
      fail(ErrorCode::validation, "wire_leaves: too few leaf ids");
    }
    by_name.emplace(name, ordered[i++]);
  });
  if (i != ordered.size()) {
    fail(ErrorCode::validation, "wire_leaves: leaf id count mismatch");
  }
  return wire_from_map(params, by_name, ordered);
}

template ModelLeaves<float> make_leaves<float>(TapeT<float>&,
                                               const ModelParamsT<float>&, bool);
template ModelLeaves<double> make_leaves<double>(TapeT<double>&,
                                                 const ModelParamsT<double>&, bool);
template ModelLeaves<float> wire_leaves<float>(const ModelParamsT<float>&,
                                               const std::vector<TapeT<float>::Id>&);
template ModelLeaves<double> wire_leaves<double>(
    const ModelParamsT<double>&, const std::vector<TapeT<double>::Id>&);

template <class S>
typename TapeT<S>::Id encode_tower(TapeT<S>& tape, const TowerLeaves<S>& tower,
                                   typename TapeT<S>::Id patches,
                                   const ModelConfig& config,
                                   std::vector<typename TapeT<S>::Id>* attn_ids) {
  using Id = typename TapeT<S>::Id;
  const int dh = config.head_dim();
  const S inv_sqrt_dh = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));

  Id projected = tape.matmul(patches, tower.embed);
  Id z = tape.add(tape.prepend_row(tower.class_token, projected), tower.pos);

  for (const auto& L : tower.layers) {
    Id h = tape.layer_norm(z, L.ln1_gamma, L.ln1_beta);
    Id q = tape.add_row_broadcast(tape.matmul(h, L.wq), L.bq);
    Id k = tape.add_row_broadcast(tape.matmul(h, L.wk), L.bk);
    Id v = tape.add_row_broadcast(tape.matmul(h, L.wv), L.bv);

    std::vector<Id> head_outputs;
    head_outputs.reserve(static_cast<std::size_t>(config.heads));
    for (int head = 0; head < config.heads; ++head) {
      const int c0 = head * dh, c1 = (head + 1) * dh;
      Id qh = tape.slice_cols(q, c0, c1);
      Id kh = tape.slice_cols(k, c0, c1);
      Id vh = tape.slice_cols(v, c0, c1);
      Id scores = tape.scale(tape.matmul_nt(qh, kh), inv_sqrt_dh);
      Id attn = tape.softmax_rows(scores);
      if (attn_ids) attn_ids->push_back(attn);
      head_outputs.push_back(tape.matmul(attn, vh));
    }
    Id merged = tape.concat_cols(head_outputs);
    Id attn_out = tape.add_row_broadcast(tape.matmul(merged, L.wo), L.bo);
    Id z_mid = tape.add(attn_out, z);

    Id h2 = tape.layer_norm(z_mid, L.ln2_gamma, L.ln2_beta);
    Id hidden = tape.gelu(tape.add_row_broadcast(tape.matmul(h2, L.w1), L.b1));
    Id mlp_out = tape.add_row_broadcast(tape.matmul(hidden, L.w2), L.b2);
    z = tape.add(mlp_out, z_mid);
  }

  Id cls = tape.take_row(z, 0);
  return tape.layer_norm(cls, tower.final_ln_gamma, tower.final_ln_beta);
}

template typename TapeT<float>::Id encode_tower<float>(
    TapeT<float>&, const TowerLeaves<float>&, TapeT<float>::Id,
    const ModelConfig&, std::vector<TapeT<float>::Id>*);
template typename TapeT<double>::Id encode_tower<double>(
    TapeT<double>&, const TowerLeaves<double>&, TapeT<double>::Id,
    const ModelConfig&, std::vector<TapeT<double>::Id>*);

namespace {

Tensor with_channel_dim(const Tensor& plane) {
  return Tensor({plane.dim(0), plane.dim(1), 1}, plane.values());
}

}  // namespace

std::vector<Tensor> tower_patch_inputs(const GridSample& fused,
                                       const ModelConfig& config) {
  const Tensor& img = fused.image;
  if (img.rank() != 3 || img.dim(0) != config.grid_h() ||
      img.dim(1) != config.grid_w() || img.dim(2) != 2) {
    fail(ErrorCode::config,
         "sample image " + img.shape_str() + " does not match config grid " +
             std::to_string(config.grid_h()) + "x" +
             std::to_string(config.grid_w()) + "x2");
  }
  switch (config.fusion) {
    case FusionMode::early:
      return {patchify(img, config.patch_size)};
    case FusionMode::t1:
      return {patchify(with_channel_dim(grid_channel(img, 0)), config.patch_size)};
    case FusionMode::t2:
      return {patchify(with_channel_dim(grid_channel(img, 1)), config.patch_size)};
    case FusionMode::late:
      return {patchify(with_channel_dim(grid_channel(img, 0)), config.patch_size),
              patchify(with_channel_dim(grid_channel(img, 1)), config.patch_size)};
  }
  fail(ErrorCode::config, "unreachable fusion mode");
}

template <class S>
typename TapeT<S>::Id classify_on_tape(TapeT<S>& tape, const ModelLeaves<S>& leaves,
                                       const GridSample& fused,
                                       const ModelConfig& config,
                                       std::vector<typename TapeT<S>::Id>* attn_ids) {
  using Id = typename TapeT<S>::Id;
  std::vector<Tensor> patch_mats = tower_patch_inputs(fused, config);

  Id readout;
  if (config.fusion == FusionMode::late) {
    Id p1 = tape.leaf(patch_mats[0].cast<S>(), false);
    Id p2 = tape.leaf(patch_mats[1].cast<S>(), false);
    Id r1 = encode_tower(tape, leaves.tower, p1, config, attn_ids);
    Id r2 = encode_tower(tape, *leaves.tower2, p2, config, attn_ids);
    readout = tape.concat_cols({r1, r2});
  } else {
    Id p = tape.leaf(patch_mats[0].cast<S>(), false);
    readout = encode_tower(tape, leaves.tower, p, config, attn_ids);
  }
  return tape.add_row_broadcast(tape.matmul(readout, leaves.head_w), leaves.head_b);
}

template typename TapeT<float>::Id classify_on_tape<float>(
    TapeT<float>&, const ModelLeaves<float>&, const GridSample&,
    const ModelConfig&, std::vector<TapeT<float>::Id>*);
template typename TapeT<double>::Id classify_on_tape<double>(
    TapeT<double>&, const ModelLeaves<double>&, const GridSample&,
    const ModelConfig&, std::vector<TapeT<double>::Id>*);

namespace {

AttentionStack collect_stack(const Tape& tape, const std::vector<Tape::Id>& ids,
                             const ModelConfig& config) {
  AttentionStack stack;
  stack.layers = config.layers;
  stack.heads = config.heads;
  stack.tokens = config.tokens();
  stack.mats.reserve(ids.size());
  for (Tape::Id id : ids) stack.mats.push_back(tape.value(id));
  return stack;
}

}  // namespace

Tensor build_token_sequence(const Tensor& patches, const TowerParams& tower) {
  if (patches.rank() != 2 || patches.dim(1) != tower.embed.dim(0)) {
    fail(ErrorCode::config,
         "patches " + patches.shape_str() + " do not match embedding " +
             tower.embed.shape_str());
  }
  if (patches.dim(0) + 1 != tower.pos.dim(0)) {
    fail(ErrorCode::config,
         "patch count " + std::to_string(patches.dim(0)) +
             " does not match positional rows " + std::to_string(tower.pos.dim(0)));
  }
  Tape tape;
  Tape::Id p = tape.leaf(patches, false);
  Tape::Id e = tape.leaf(tower.embed, false);
  Tape::Id ct = tape.leaf(tower.class_token, false);
  Tape::Id pos = tape.leaf(tower.pos, false);
  Tape::Id z = tape.add(tape.prepend_row(ct, tape.matmul(p, e)), pos);
  return tape.value(z);
}

Tensor encoder_layer(const Tensor& z, const TowerParams::Layer& layer, int heads,
                     std::vector<Tensor>* recorded) {
  if (z.rank() != 2) {
    fail(ErrorCode::config, "encoder_layer expects a token matrix, got " +
                                z.shape_str());
  }
  const int d = z.dim(1);
  if (d % heads != 0) {
    fail(ErrorCode::config, "token width not divisible by head count");
  }

  Tape tape;
  TowerLeaves<float> tl;
  tl.layers.resize(1);
  auto& L = tl.layers[0];
  L.ln1_gamma = tape.leaf(layer.ln1_gamma, false);
  L.ln1_beta = tape.leaf(layer.ln1_beta, false);
  L.wq = tape.leaf(layer.wq, false);
  L.bq = tape.leaf(layer.bq, false);
  L.wk = tape.leaf(layer.wk, false);
  L.bk = tape.leaf(layer.bk, false);
  L.wv = tape.leaf(layer.wv, false);
  L.bv = tape.leaf(layer.bv, false);
  L.wo = tape.leaf(layer.wo, false);
  L.bo = tape.leaf(layer.bo, false);
  L.ln2_gamma = tape.leaf(layer.ln2_gamma, false);
  L.ln2_beta = tape.leaf(layer.ln2_beta, false);
  L.w1 = tape.leaf(layer.w1, false);
  L.b1 = tape.leaf(layer.b1, false);
  L.w2 = tape.leaf(layer.w2, false);
  L.b2 = tape.leaf(layer.b2, false);

  // Inline the single-layer body of encode_tower.
  using Id = Tape::Id;
  const int dh = d / heads;
  const float inv_sqrt_dh = static_cast<float>(1.0 / std::sqrt(static_cast<double>(dh)));
  Id zi = tape.leaf(z, false);
  Id h = tape.layer_norm(zi, L.ln1_gamma, L.ln1_beta);
  Id q = tape.add_row_broadcast(tape.matmul(h, L.wq), L.bq);
  Id kk = tape.add_row_broadcast(tape.matmul(h, L.wk), L.bk);
  Id v = tape.add_row_broadcast(tape.matmul(h, L.wv), L.bv);
  std::vector<Id> head_outputs;
  for (int head = 0; head < heads; ++head) {
    const int c0 = head * dh, c1 = (head + 1) * dh;
    Id attn = tape.softmax_rows(
        tape.scale(tape.matmul_nt(tape.slice_cols(q, c0, c1),
                                  tape.slice_cols(kk, c0, c1)),
                   inv_sqrt_dh));
    if (recorded) recorded->push_back(tape.value(attn));
    head_outputs.push_back(tape.matmul(attn, tape.slice_cols(v, c0, c1)));
  }
  Id attn_out = tape.add_row_broadcast(
      tape.matmul(tape.concat_cols(head_outputs), L.wo), L.bo);
  Id z_mid = tape.add(attn_out, zi);
  Id h2 = tape.layer_norm(z_mid, L.ln2_gamma, L.ln2_beta);
  Id hidden = tape.gelu(tape.add_row_broadcast(tape.matmul(h2, L.w1), L.b1));
  Id out = tape.add(tape.add_row_broadcast(tape.matmul(hidden, L.w2), L.b2), z_mid);
  return tape.value(out);
}

ForwardResult forward_classify(const Tensor& image, const ModelParams& params,
                               const ModelConfig& config, bool record) {
  if (config.fusion == FusionMode::late) {
    fail(ErrorCode::config,
         "forward_classify is single-tower; use forward_late_fusion");
  }
  if (image.rank() != 3 || image.dim(0) != config.grid_h() ||
      image.dim(1) != config.grid_w() || image.dim(2) != config.channels()) {
    fail(ErrorCode::config,
         "image " + image.shape_str() + " does not match config grid " +
             std::to_string(config.grid_h()) + "x" + std::to_string(config.grid_w()) +
             "x" + std::to_string(config.channels()));
  }
  Tape tape;
  ModelLeaves<float> leaves = make_leaves(tape, params, false);
  std::vector<Tape::Id> attn_ids;
  Tape::Id patches = tape.leaf(patchify(image, config.patch_size), false);
  Tape::Id readout = encode_tower(tape, leaves.tower, patches, config,
                                  record ? &attn_ids : nullptr);
  Tape::Id logits =
      tape.add_row_broadcast(tape.matmul(readout, leaves.head_w), leaves.head_b);

  ForwardResult result;
  result.logits.scores = Tensor({config.num_classes}, tape.value(logits).values());
  if (record) result.attention = collect_stack(tape, attn_ids, config);
  return result;
}

ForwardResult forward_late_fusion(const Tensor& t1_grid, const Tensor& t2_grid,
                                  const ModelParams& params,
                                  const ModelConfig& config, bool record) {
  if (config.fusion != FusionMode::late || !params.tower2.has_value()) {
    fail(ErrorCode::config, "forward_late_fusion requires a late-fusion model");
  }
  GridSample fused;
  fused.image = fuse_early(t1_grid.rank() == 3 ? grid_channel(t1_grid, 0) : t1_grid,
                           t2_grid.rank() == 3 ? grid_channel(t2_grid, 0) : t2_grid);
  fused.k = config.k;
  return classify_scan(fused, params, config, record);
}

ForwardResult classify_scan(const GridSample& fused, const ModelParams& params,
                            const ModelConfig& config, bool record) {
  Tape tape;
  ModelLeaves<float> leaves = make_leaves(tape, params, false);
  std::vector<Tape::Id> attn_ids;
  Tape::Id logits = classify_on_tape(tape, leaves, fused, config,
                                     record ? &attn_ids : nullptr);

  ForwardResult result;
  result.logits.scores = Tensor({config.num_classes}, tape.value(logits).values());
  if (record) {
    if (config.fusion == FusionMode::late) {
      const std::size_t per_tower = attn_ids.size() / 2;
      std::vector<Tape::Id> first(attn_ids.begin(),
                                  attn_ids.begin() + static_cast<std::ptrdiff_t>(per_tower));
      std::vector<Tape::Id> second(attn_ids.begin() + static_cast<std::ptrdiff_t>(per_tower),
                                   attn_ids.end());
      result.attention = collect_stack(tape, first, config);
      result.attention2 = collect_stack(tape, second, config);
    } else {
      result.attention = collect_stack(tape, attn_ids, config);
    }
  }
  return result;
}

template <class S>
template <class T>
ModelParamsT<T> ModelParamsT<S>::cast() const {
  ModelParamsT<T> out;
  auto cast_tower = [](const TowerParamsT<S>& src) {
    TowerParamsT<T> dst;
    dst.embed = src.embed.template cast<T>();
    dst.pos = src.pos.template cast<T>();
    dst.class_token = src.class_token.template cast<T>();
    dst.layers.resize(src.layers.size());
    for (std::size_t i = 0; i < src.layers.size(); ++i) {
      const auto& a = src.layers[i];
      auto& b = dst.layers[i];
      b.ln1_gamma = a.ln1_gamma.template cast<T>();
      b.ln1_beta = a.ln1_beta.template cast<T>();
      b.wq = a.wq.template cast<T>();
      b.bq = a.bq.template cast<T>();
      b.wk = a.wk.template cast<T>();
      b.bk = a.bk.template cast<T>();
      b.wv = a.wv.template cast<T>();
      b.bv = a.bv.template cast<T>();
      b.wo = a.wo.template cast<T>();
      b.bo = a.bo.template cast<T>();
      b.ln2_gamma = a.ln2_gamma.template cast<T>();
      b.ln2_beta = a.ln2_beta.template cast<T>();
      b.w1 = a.w1.template cast<T>();
      b.b1 = a.b1.template cast<T>();
      b.w2 = a.w2.template cast<T>();
      b.b2 = a.b2.template cast<T>();
    }
    dst.final_ln_gamma = src.final_ln_gamma.template cast<T>();
    dst.final_ln_beta = src.final_ln_beta.template cast<T>();
    return dst;
  };
  out.tower = cast_tower(tower);
  if (tower2.has_value()) out.tower2 = cast_tower(*tower2);
  out.head_w = head_w.template cast<T>();
  out.head_b = head_b.template cast<T>();
  return out;
}

template ModelParamsT<double> ModelParamsT<float>::cast<double>() const;
template ModelParamsT<float> ModelParamsT<double>::cast<float>() const;

}  // namespace gridvit
