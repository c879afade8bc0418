#include "train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "augment.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace gridvit {

void TrainConfig::validate() const {
  if (lr <= 0.0f) fail(ErrorCode::config, "train config: lr must be > 0");
  if (batch_size < 1) fail(ErrorCode::config, "train config: batch_size must be >= 1");
  if (epochs < 1) fail(ErrorCode::config, "train config: epochs must be >= 1");
  if (inner_fraction < 0.0 || inner_fraction > 0.5) {
    fail(ErrorCode::config, "train config: inner_fraction must lie in [0, 0.5]");
  }
  if (stride < 1) fail(ErrorCode::config, "train config: stride must be >= 1");
  if (selection != "accuracy") {
    fail(ErrorCode::config, "train config: unknown selection metric '" + selection + "'");
  }
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return nlohmann::json{
      {"lr", c.lr},           {"batch_size", c.batch_size},
      {"epochs", c.epochs},   {"seed", c.seed},
      {"augment", c.augment}, {"inner_fraction", c.inner_fraction},
      {"stride", c.stride},   {"selection", c.selection},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    if (j.contains("lr")) c.lr = j.at("lr").get<float>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("augment")) c.augment = j.at("augment").get<bool>();
    if (j.contains("inner_fraction"))
      c.inner_fraction = j.at("inner_fraction").get<double>();
    if (j.contains("stride")) c.stride = j.at("stride").get<int>();
    if (j.contains("selection")) c.selection = j.at("selection").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::config, std::string("bad train config: ") + e.what());
  }
  c.validate();
  return c;
}

void save_train_log(const TrainLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write train log '" + path + "'");
  for (const EpochLog& e : log.epochs) {
    out << nlohmann::json{{"epoch", e.epoch},
                          {"train_loss", e.train_loss},
                          {"val_accuracy", e.val_accuracy},
                          {"best", e.epoch == log.best_epoch}}
               .dump()
        << "\n";
  }
  if (!out) fail(ErrorCode::io, "short write to train log '" + path + "'");
}

GridSample make_grid_sample(const ScanRecord& rec, int window_start, int k) {
  GridSample s;
  s.case_id = rec.case_id;
  s.label = rec.label;
  s.window_start = window_start;
  s.k = k;
  Tensor g1 = pack_grid(window_slices(rec.t1, window_start, k));
  Tensor g2 = pack_grid(window_slices(rec.t2, window_start, k));
  s.image = fuse_early(g1, g2);
  return s;
}

double train_step(ModelParams& params, const std::vector<GridSample>& batch,
                  AdamState& state, const ModelConfig& config) {
  if (batch.empty()) fail(ErrorCode::validation, "train_step: empty batch");

  Tape tape;
  ModelLeaves<float> leaves = make_leaves(tape, params, true);

  Tape::Id loss_sum = -1;
  for (const GridSample& sample : batch) {
    Tape::Id logits = classify_on_tape(tape, leaves, sample, config, nullptr);
    Tape::Id loss = tape.cross_entropy(logits, {sample.label});
    loss_sum = loss_sum < 0 ? loss : tape.add(loss_sum, loss);
  }
  Tape::Id mean_loss =
      tape.scale(loss_sum, 1.0f / static_cast<float>(batch.size()));

  const double loss_value = tape.value(mean_loss)[0];
  if (!std::isfinite(loss_value)) {
    fail(ErrorCode::train_abort,
         "non-finite training loss at optimizer step " +
             std::to_string(state.step + 1));
  }

  tape.backward(mean_loss);
  std::vector<Tensor> grads;
  grads.reserve(leaves.ordered.size());
  for (Tape::Id id : leaves.ordered) grads.push_back(tape.grad(id));

  std::vector<NamedParam> refs = param_refs(params);
  adam_step(refs, grads, state);
  return loss_value;
}

namespace {

std::vector<GridSample> training_samples(const std::vector<ScanRecord>& cases,
                                         const ModelConfig& mc,
                                         const TrainConfig& tc) {
  std::vector<GridSample> samples;
  for (const ScanRecord& rec : cases) {
    for (int start : extract_windows(rec.t1.dz(), mc.k, tc.stride)) {
      samples.push_back(make_grid_sample(rec, start, mc.k));
    }
  }
  return samples;
}

}  // namespace

FitResult fit(const std::vector<ScanRecord>& train_cases,
              const std::vector<ScanRecord>& inner_val_cases,
              const ModelConfig& model_config, const TrainConfig& train_config) {
  model_config.validate();
  train_config.validate();
  if (train_cases.empty()) {
    fail(ErrorCode::validation, "fit: empty training set");
  }
  for (const ScanRecord& t : train_cases) {
    for (const ScanRecord& v : inner_val_cases) {
      if (t.case_id == v.case_id) {
        fail(ErrorCode::validation,
             "fit: case '" + t.case_id + "' appears in both the training and "
             "inner-validation sets");
      }
    }
  }

  const std::vector<GridSample> base_samples =
      training_samples(train_cases, model_config, train_config);

  ModelParams params = init_params(model_config, train_config.seed);
  AdamConfig adam_cfg;
  adam_cfg.lr = train_config.lr;
  std::vector<NamedParam> refs = param_refs(params);
  AdamState state = adam_init(refs, adam_cfg);

  FitResult result;
  result.params = params;
  double best_metric = -1.0;

  for (int epoch = 1; epoch <= train_config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<std::size_t> order(base_samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(Rng::derive(train_config.seed,
                                {0x5e9u, static_cast<std::uint64_t>(epoch)}));
    shuffle_rng.shuffle(order);

    double loss_total = 0.0;
    int steps = 0;
    std::vector<GridSample> batch;
    batch.reserve(static_cast<std::size_t>(train_config.batch_size));
    auto flush = [&]() {
      if (batch.empty()) return;
      loss_total += train_step(params, batch, state, model_config) *
                    static_cast<double>(batch.size());
      ++steps;
      batch.clear();
    };
    for (std::size_t idx : order) {
      const GridSample& s = base_samples[idx];
      if (train_config.augment) {
        Rng aug_rng(Rng::derive(train_config.seed,
                                {0xa46u, static_cast<std::uint64_t>(epoch),
                                 Rng::hash_str(s.case_id),
                                 static_cast<std::uint64_t>(s.window_start)}));
        batch.push_back(augment(s, aug_rng));
      } else {
        batch.push_back(s);
      }
      if (static_cast<int>(batch.size()) == train_config.batch_size) flush();
    }
    flush();

    EpochLog entry;
    entry.epoch = epoch;
    entry.steps = steps;
    entry.train_loss = loss_total / static_cast<double>(base_samples.size());
    if (!std::isfinite(entry.train_loss)) {
      fail(ErrorCode::train_abort,
           "non-finite epoch loss at epoch " + std::to_string(epoch));
    }
    if (!inner_val_cases.empty()) {
      EvalResult val = evaluate(params, model_config, inner_val_cases);
      entry.val_accuracy = val.metrics.accuracy;
    }
    entry.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    result.log.epochs.push_back(entry);

    // Earliest epoch wins ties. Without an inner set the last epoch is kept.
    const double metric = inner_val_cases.empty()
                              ? static_cast<double>(epoch)
                              : entry.val_accuracy;
    if (metric > best_metric) {
      best_metric = metric;
      result.log.best_epoch = epoch;
      result.params = params;
    }
  }
  return result;
}

EvalResult evaluate(const ModelParams& params, const ModelConfig& config,
                    const std::vector<ScanRecord>& cases) {
  EvalResult result;
  std::vector<int> preds, labels;
  for (const ScanRecord& rec : cases) {
    if (rec.t1.dz() < config.k) {
      result.skipped.push_back(rec.case_id);
      continue;
    }
    const int start = central_window(rec.t1.dz(), config.k);
    GridSample sample = make_grid_sample(rec, start, config.k);
    ForwardResult fwd = classify_scan(sample, params, config, false);
    const int pred = fwd.logits.argmax();
    result.predictions.emplace_back(rec.case_id, pred);
    preds.push_back(pred);
    labels.push_back(rec.label);
  }
  if (!preds.empty()) result.metrics = compute_metrics(preds, labels);
  return result;
}

}  // namespace gridvit
