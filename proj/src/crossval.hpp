#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "manifest.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "train.hpp"

namespace gridvit {

// Stratified fold assignment: disjoint, covering, per-class counts across
// folds differ by at most one, and total fold sizes differ by at most one.
struct FoldPlan {
  int folds = 0;
  std::uint64_t seed = 0;
  std::map<std::string, int> assignment;            // case_id -> fold
  std::vector<std::vector<std::string>> members;    // fold -> case ids

  int fold_of(const std::string& case_id) const;
};

// Labels are read from the entries; warn_sink (may be null) receives a
// message when a class has fewer members than folds.
FoldPlan stratified_folds(const std::vector<ManifestEntry>& records, int folds,
                          std::uint64_t seed,
                          std::vector<std::string>* warnings = nullptr);

struct FoldOutcome {
  int fold = 0;
  bool failed = false;
  std::string error;
  MetricSet metrics;
  int best_epoch = 0;
};

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation over fold values
};

struct CVReport {
  FusionMode mode = FusionMode::early;
  std::vector<FoldOutcome> folds;
  int failed_folds = 0;
  Aggregate accuracy, precision, recall;
  std::string config_fingerprint;
};

// Outer loop: fold f is the test set; the remaining cases are split into
// training and a stratified inner-validation hold-out; fit selects the best
// inner epoch; the selected weights are evaluated on fold f. A failing fold
// is recorded and excluded from the aggregates.
CVReport nested_cv(const std::vector<ScanRecord>& records, int folds,
                   const ModelConfig& model_config, const TrainConfig& train_config,
                   std::uint64_t seed);

// Mean and sample standard deviation over the successful folds of each
// metric; requires at least one successful fold.
void aggregate(CVReport& report);

// "0.70 ± 0.11"-style cell.
std::string format_cell(const Aggregate& a);

// Aligned table with one row per report, Method/Accuracy/Precision/Recall.
std::string render_table(const std::vector<CVReport>& rows);

nlohmann::json cv_report_to_json(const CVReport& report);

// Stratified hold-out split of records: the second return gets about
// `fraction` of each class (at least one case per non-empty class when
// fraction > 0). Deterministic under seed.
std::pair<std::vector<ScanRecord>, std::vector<ScanRecord>> stratified_holdout(
    const std::vector<ScanRecord>& records, double fraction, std::uint64_t seed);

std::string config_fingerprint(const ModelConfig& mc, const TrainConfig& tc,
                               int folds, std::uint64_t seed);

}  // namespace gridvit
