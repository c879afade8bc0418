#include "runner.hpp"

#include <filesystem>
#include <fstream>

#include "checkpoint.hpp"
#include "error.hpp"
#include "rollout.hpp"

namespace gridvit {

namespace {

std::vector<ScanRecord> load_manifest_scans(const RunConfig& config) {
  const std::vector<ManifestEntry> entries = parse_manifest(config.manifest);
  if (entries.empty()) {
    fail(ErrorCode::validation, "manifest '" + config.manifest + "' lists no cases");
  }
  return load_scans(entries, manifest_dir(config.manifest));
}

void check_geometry(const ModelConfig& mc, const std::vector<ScanRecord>& scans) {
  for (const ScanRecord& s : scans) {
    if (s.t1.height() != mc.slice_h || s.t1.width() != mc.slice_w) {
      fail(ErrorCode::config,
           "case '" + s.case_id + "' slices are " + std::to_string(s.t1.height()) +
               "x" + std::to_string(s.t1.width()) + " but the model config expects " +
               std::to_string(mc.slice_h) + "x" + std::to_string(mc.slice_w));
    }
  }
}

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write '" + path + "'");
  out << j.dump(2) << "\n";
  if (!out) fail(ErrorCode::io, "short write to '" + path + "'");
}

}  // namespace

TrainOutcome run_train(const RunConfig& config, const std::string& out_checkpoint) {
  std::vector<ScanRecord> scans = load_manifest_scans(config);
  check_geometry(config.model, scans);

  auto [train_set, inner_val] =
      stratified_holdout(scans, config.train.inner_fraction, config.seed);
  FitResult fitted = fit(train_set, inner_val, config.model, config.train);

  TrainOutcome outcome;
  outcome.best_epoch = fitted.log.best_epoch;
  if (!fitted.log.epochs.empty()) {
    outcome.final_train_loss = fitted.log.epochs.back().train_loss;
    outcome.best_val_accuracy =
        fitted.log.epochs[static_cast<std::size_t>(fitted.log.best_epoch - 1)]
            .val_accuracy;
  }
  if (!inner_val.empty()) {
    EvalResult ev = evaluate(fitted.params, config.model, inner_val);
    outcome.inner_metrics = ev.metrics;
  }

  save_checkpoint(fitted.params, config.model, out_checkpoint);
  outcome.checkpoint_path = out_checkpoint;
  outcome.log_path = out_checkpoint + ".log.jsonl";
  save_train_log(fitted.log, outcome.log_path);
  return outcome;
}

EvalOutcome run_eval_checkpoint(const RunConfig& config,
                                const std::string& checkpoint_path,
                                const std::string& out_prefix) {
  auto loaded = load_checkpoint(checkpoint_path);
  ModelParams& params = loaded.first;
  const ModelConfig& mc = loaded.second;

  std::vector<ScanRecord> scans;
  try {
    scans = load_manifest_scans(config);
    check_geometry(mc, scans);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config) {
      // Shapes in the checkpoint contradict the data: evaluation failure.
      fail(ErrorCode::eval_failure, e.what());
    }
    throw;
  }

  EvalResult ev = evaluate(params, mc, scans);
  if (ev.predictions.empty()) {
    fail(ErrorCode::eval_failure, "no case was deep enough to evaluate");
  }

  EvalOutcome out;
  out.metrics = ev.metrics;
  out.evaluated = static_cast<int>(ev.predictions.size());
  out.skipped = static_cast<int>(ev.skipped.size());

  CVReport row;
  row.mode = mc.fusion;
  FoldOutcome f;
  f.fold = 0;
  f.metrics = ev.metrics;
  row.folds.push_back(f);
  aggregate(row);
  out.table = render_table({row});

  if (!out_prefix.empty()) {
    nlohmann::json preds = nlohmann::json::array();
    for (const auto& [case_id, pred] : ev.predictions) {
      preds.push_back({{"id", case_id}, {"predicted", pred}});
    }
    nlohmann::json j = {{"mode", fusion_name(mc.fusion)},
                        {"accuracy", ev.metrics.accuracy},
                        {"precision", ev.metrics.precision},
                        {"recall", ev.metrics.recall},
                        {"confusion", ev.metrics.confusion},
                        {"evaluated", out.evaluated},
                        {"skipped", ev.skipped},
                        {"predictions", preds}};
    out.json_path = out_prefix + ".json";
    write_json(j, out.json_path);
  }
  return out;
}

CvOutcome run_eval_cv(const RunConfig& config, bool all_modes,
                      const std::string& out_prefix) {
  std::vector<ScanRecord> scans = load_manifest_scans(config);
  check_geometry(config.model, scans);

  std::vector<FusionMode> modes;
  if (all_modes) {
    modes = {FusionMode::t1, FusionMode::t2, FusionMode::late, FusionMode::early};
  } else {
    modes = {config.mode};
  }

  std::vector<CVReport> reports;
  for (FusionMode mode : modes) {
    ModelConfig mc = config.model;
    mc.fusion = mode;
    reports.push_back(nested_cv(scans, config.folds, mc, config.train, config.seed));
  }

  CvOutcome out;
  out.table = render_table(reports);
  if (!out_prefix.empty()) {
    nlohmann::json j = nlohmann::json::array();
    for (const CVReport& r : reports) j.push_back(cv_report_to_json(r));
    out.json_path = out_prefix + ".json";
    write_json(j, out.json_path);
    out.text_path = out_prefix + ".txt";
    std::ofstream txt(out.text_path);
    if (!txt) fail(ErrorCode::io, "cannot write '" + out.text_path + "'");
    txt << out.table;
  }
  return out;
}

namespace {

void export_tower_heatmap(const AttentionStack& stack, const ModelConfig& mc,
                          const std::string& prefix) {
  Tensor64 map = rollout(average_heads(stack));
  RolloutMap rmap = class_attention_map(map, mc);
  export_heatmap(rmap, mc, prefix);
}

}  // namespace

ExplainOutcome run_explain(const RunConfig& config,
                           const std::string& checkpoint_path,
                           const std::string& case_id,
                           const std::string& out_prefix) {
  auto loaded = load_checkpoint(checkpoint_path);
  ModelParams& params = loaded.first;
  const ModelConfig& mc = loaded.second;

  const std::vector<ManifestEntry> entries = parse_manifest(config.manifest);
  const ManifestEntry* entry = nullptr;
  for (const ManifestEntry& e : entries) {
    if (e.case_id == case_id) {
      entry = &e;
      break;
    }
  }
  if (!entry) {
    std::string known;
    for (std::size_t i = 0; i < entries.size() && i < 8; ++i) {
      if (i) known += ", ";
      known += entries[i].case_id;
    }
    if (entries.size() > 8) known += ", ...";
    fail(ErrorCode::unknown_case,
         "case '" + case_id + "' is not in the manifest (known: " + known + ")");
  }

  ScanRecord rec = load_scan(*entry, manifest_dir(config.manifest));
  if (rec.t1.dz() < mc.k) {
    fail(ErrorCode::validation,
         "case '" + case_id + "' has depth " + std::to_string(rec.t1.dz()) +
             ", too shallow for k = " + std::to_string(mc.k));
  }
  if (rec.t1.height() != mc.slice_h || rec.t1.width() != mc.slice_w) {
    fail(ErrorCode::eval_failure,
         "case '" + case_id + "' slices are " + std::to_string(rec.t1.height()) +
             "x" + std::to_string(rec.t1.width()) + " but the checkpoint expects " +
             std::to_string(mc.slice_h) + "x" + std::to_string(mc.slice_w));
  }

  GridSample sample = make_grid_sample(rec, central_window(rec.t1.dz(), mc.k), mc.k);
  ForwardResult fwd = classify_scan(sample, params, mc, true);

  ExplainOutcome out;
  out.predicted = fwd.logits.argmax();
  out.num_classes = mc.num_classes;
  for (int i = 0; i < mc.num_classes && i < 8; ++i) {
    out.scores[static_cast<std::size_t>(i)] =
        static_cast<double>(fwd.logits.scores[static_cast<std::size_t>(i)]);
  }

  if (mc.fusion == FusionMode::late) {
    export_tower_heatmap(*fwd.attention, mc, out_prefix + ".t1");
    export_tower_heatmap(*fwd.attention2, mc, out_prefix + ".t2");
    out.pgm_path = out_prefix + ".t1.pgm";
    out.csv_path = out_prefix + ".t1.csv";
  } else {
    export_tower_heatmap(*fwd.attention, mc, out_prefix);
    out.pgm_path = out_prefix + ".pgm";
    out.csv_path = out_prefix + ".csv";
  }

  nlohmann::json pj = {{"id", case_id},
                       {"predicted", out.predicted},
                       {"label", rec.label},
                       {"window_start", sample.window_start},
                       {"scores", std::vector<float>(
                                      fwd.logits.scores.values().begin(),
                                      fwd.logits.scores.values().end())}};
  out.prediction_path = out_prefix + ".pred.json";
  write_json(pj, out.prediction_path);
  return out;
}

}  // namespace gridvit
