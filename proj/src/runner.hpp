#pragma once

#include <array>
#include <string>

#include "crossval.hpp"
#include "runconfig.hpp"
#include "synthetic.hpp"

namespace gridvit {

// High-level entry points shared by the C API and, through it, the CLI.

struct TrainOutcome {
  double final_train_loss = 0.0;
  double best_val_accuracy = 0.0;
  int best_epoch = 0;
  MetricSet inner_metrics;        // best weights re-evaluated on the inner set
  std::string checkpoint_path;
  std::string log_path;
};

// Splits the manifest's cases into train / inner validation, fits, writes
// the checkpoint and the epoch log next to it.
TrainOutcome run_train(const RunConfig& config, const std::string& out_checkpoint);

struct EvalOutcome {
  MetricSet metrics;
  int evaluated = 0;
  int skipped = 0;
  std::string table;       // single-row table in report format
  std::string json_path;   // written next to out_prefix
};

// Central-window evaluation of a checkpoint over every manifest case.
EvalOutcome run_eval_checkpoint(const RunConfig& config,
                                const std::string& checkpoint_path,
                                const std::string& out_prefix);

struct CvOutcome {
  std::string table;
  std::string json_path;
  std::string text_path;
};

// Nested cross-validation for the config's mode, or for all four fusion
// configurations when all_modes is set; writes <prefix>.json/<prefix>.txt.
CvOutcome run_eval_cv(const RunConfig& config, bool all_modes,
                      const std::string& out_prefix);

struct ExplainOutcome {
  int predicted = 0;
  std::array<double, 8> scores = {};  // first num_classes entries used
  int num_classes = 0;
  std::string pgm_path;
  std::string csv_path;
  std::string prediction_path;
};

// Recorded central-window forward for one case; writes the rollout graymap,
// the raw per-patch CSV, and a prediction JSON. Late-fusion checkpoints get
// per-tower heatmaps (<prefix>.t1 / <prefix>.t2).
ExplainOutcome run_explain(const RunConfig& config,
                           const std::string& checkpoint_path,
                           const std::string& case_id,
                           const std::string& out_prefix);

}  // namespace gridvit
