#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "adam.hpp"
#include "manifest.hpp"
#include "metrics.hpp"
#include "model.hpp"

namespace gridvit {

struct TrainConfig {
  float lr = 0.003f;
  int batch_size = 8;
  int epochs = 100;  // the reference recipe's 3000 stays available via config
  std::uint64_t seed = 7;
  bool augment = true;
  double inner_fraction = 0.2;  // stratified hold-out share for selection
  int stride = 1;               // sliding-window stride for training samples
  std::string selection = "accuracy";

  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochLog {
  int epoch = 0;           // 1-based
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  int steps = 0;           // optimizer steps taken this epoch
  double wall_ms = 0.0;    // in-memory only; not serialized (runs must be
                           // byte-reproducible)
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  int best_epoch = 0;  // 1-based; ties break toward the earliest epoch
};

// Deterministic serialization (epoch, train_loss, val_accuracy, best flag),
// one JSON object per line.
void save_train_log(const TrainLog& log, const std::string& path);

// One forward/backward/update over a batch. Returns the pre-update loss.
double train_step(ModelParams& params, const std::vector<GridSample>& batch,
                  AdamState& state, const ModelConfig& config);

struct FitResult {
  ModelParams params;  // weights from the best inner-validation epoch
  TrainLog log;
};

// Mini-batch fine-tuning over all sliding-window samples of the training
// cases, with augmentation; inner validation is evaluated per epoch on the
// central window only.
FitResult fit(const std::vector<ScanRecord>& train_cases,
              const std::vector<ScanRecord>& inner_val_cases,
              const ModelConfig& model_config, const TrainConfig& train_config);

struct EvalResult {
  std::vector<std::pair<std::string, int>> predictions;  // (case_id, class)
  MetricSet metrics;
  std::vector<std::string> skipped;  // cases too shallow for k slices
};

// Central-window inference per case, no augmentation.
EvalResult evaluate(const ModelParams& params, const ModelConfig& config,
                    const std::vector<ScanRecord>& cases);

// The fused C = 2 sample for one window of a case.
GridSample make_grid_sample(const ScanRecord& rec, int window_start, int k);

}  // namespace gridvit
