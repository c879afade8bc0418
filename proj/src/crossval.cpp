#include "crossval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "error.hpp"
#include "rng.hpp"

namespace gridvit {

int FoldPlan::fold_of(const std::string& case_id) const {
  auto it = assignment.find(case_id);
  if (it == assignment.end()) {
    fail(ErrorCode::unknown_case, "case '" + case_id + "' is not in the fold plan");
  }
  return it->second;
}

FoldPlan stratified_folds(const std::vector<ManifestEntry>& records, int folds,
                          std::uint64_t seed,
                          std::vector<std::string>* warnings) {
  if (folds < 2) fail(ErrorCode::validation, "fold count must be >= 2");
  if (static_cast<int>(records.size()) < folds) {
    fail(ErrorCode::validation,
         "cannot split " + std::to_string(records.size()) + " cases into " +
             std::to_string(folds) + " folds");
  }

  std::vector<std::vector<std::string>> by_class(3);
  for (const ManifestEntry& r : records) {
    by_class[static_cast<std::size_t>(r.label)].push_back(r.case_id);
  }

  FoldPlan plan;
  plan.folds = folds;
  plan.seed = seed;
  plan.members.resize(static_cast<std::size_t>(folds));

  // Classes are dealt consecutively around the fold wheel with one shared
  // cursor, which keeps both the per-class counts and the total fold sizes
  // within one of each other.
  int cursor = 0;
  for (int cls = 0; cls < 3; ++cls) {
    auto& ids = by_class[static_cast<std::size_t>(cls)];
    if (!ids.empty() && static_cast<int>(ids.size()) < folds && warnings) {
      warnings->push_back("class " + std::to_string(cls) + " has only " +
                          std::to_string(ids.size()) + " cases for " +
                          std::to_string(folds) + " folds; some folds will miss it");
    }
    Rng rng(Rng::derive(seed, {0xf01d5u, static_cast<std::uint64_t>(cls)}));
    rng.shuffle(ids);
    for (const std::string& id : ids) {
      const int fold = cursor % folds;
      plan.assignment.emplace(id, fold);
      plan.members[static_cast<std::size_t>(fold)].push_back(id);
      ++cursor;
    }
  }

  // Partition check runs on every plan: disjoint (the assignment map cannot
  // hold an id twice) and covering.
  std::size_t assigned = 0;
  for (const auto& fold : plan.members) assigned += fold.size();
  if (assigned != records.size() || plan.assignment.size() != records.size()) {
    fail(ErrorCode::validation, "fold plan does not partition the case set");
  }
  return plan;
}

std::pair<std::vector<ScanRecord>, std::vector<ScanRecord>> stratified_holdout(
    const std::vector<ScanRecord>& records, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 0.5) {
    fail(ErrorCode::validation, "hold-out fraction must lie in [0, 0.5]");
  }
  std::vector<std::vector<std::size_t>> by_class(3);
  for (std::size_t i = 0; i < records.size(); ++i) {
    by_class[static_cast<std::size_t>(records[i].label)].push_back(i);
  }
  std::vector<bool> held(records.size(), false);
  if (fraction > 0.0) {
    for (int cls = 0; cls < 3; ++cls) {
      auto& idx = by_class[static_cast<std::size_t>(cls)];
      if (idx.empty()) continue;
      Rng rng(Rng::derive(seed, {0x501du, static_cast<std::uint64_t>(cls)}));
      rng.shuffle(idx);
      std::size_t take = static_cast<std::size_t>(
          std::lround(fraction * static_cast<double>(idx.size())));
      take = std::max<std::size_t>(take, 1);
      take = std::min(take, idx.size() > 1 ? idx.size() - 1 : idx.size());
      for (std::size_t i = 0; i < take; ++i) held[idx[i]] = true;
    }
  }
  std::pair<std::vector<ScanRecord>, std::vector<ScanRecord>> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    (held[i] ? out.second : out.first).push_back(records[i]);
  }
  return out;
}

std::string config_fingerprint(const ModelConfig& mc, const TrainConfig& tc,
                               int folds, std::uint64_t seed) {
  nlohmann::json j = {{"model", model_config_to_json(mc)},
                      {"train", train_config_to_json(tc)},
                      {"folds", folds},
                      {"seed", seed}};
  const std::uint64_t h = Rng::hash_str(j.dump());
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

CVReport nested_cv(const std::vector<ScanRecord>& records, int folds,
                   const ModelConfig& model_config, const TrainConfig& train_config,
                   std::uint64_t seed) {
  std::vector<ManifestEntry> entries;
  entries.reserve(records.size());
  for (const ScanRecord& r : records) {
    entries.push_back({r.case_id, "", "", r.label});
  }
  FoldPlan plan = stratified_folds(entries, folds, seed);

  CVReport report;
  report.mode = model_config.fusion;
  report.config_fingerprint =
      config_fingerprint(model_config, train_config, folds, seed);

  for (int f = 0; f < folds; ++f) {
    FoldOutcome outcome;
    outcome.fold = f;
    try {
      std::vector<ScanRecord> test_set, rest;
      for (const ScanRecord& r : records) {
        (plan.fold_of(r.case_id) == f ? test_set : rest).push_back(r);
      }
      TrainConfig fold_tc = train_config;
      fold_tc.seed = Rng::derive(train_config.seed,
                                 {0xcf01du, static_cast<std::uint64_t>(f)});
      auto [train_set, inner_val] =
          stratified_holdout(rest, train_config.inner_fraction, fold_tc.seed);
      FitResult fitted = fit(train_set, inner_val, model_config, fold_tc);
      outcome.best_epoch = fitted.log.best_epoch;
      EvalResult ev = evaluate(fitted.params, model_config, test_set);
      outcome.metrics = ev.metrics;
    } catch (const Error& e) {
      outcome.failed = true;
      outcome.error = e.what();
      report.failed_folds += 1;
    }
    report.folds.push_back(std::move(outcome));
  }
  aggregate(report);
  return report;
}

namespace {

Aggregate aggregate_values(const std::vector<double>& values) {
  Aggregate a;
  for (double v : values) a.mean += v;
  a.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return a;
}

}  // namespace

void aggregate(CVReport& report) {
  std::vector<double> acc, prec, rec;
  for (const FoldOutcome& f : report.folds) {
    if (f.failed) continue;
    acc.push_back(f.metrics.accuracy);
    prec.push_back(f.metrics.precision);
    rec.push_back(f.metrics.recall);
  }
  if (acc.empty()) {
    fail(ErrorCode::eval_failure,
         "no successful folds to aggregate (" +
             std::to_string(report.failed_folds) + " failed)");
  }
  report.accuracy = aggregate_values(acc);
  report.precision = aggregate_values(prec);
  report.recall = aggregate_values(rec);
}

std::string format_cell(const Aggregate& a) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", a.mean, a.stddev);
  return buf;
}

namespace {

std::string row_label(FusionMode m) {
  switch (m) {
    case FusionMode::t1: return "T1";
    case FusionMode::t2: return "T2";
    case FusionMode::late: return "Late fusion";
    case FusionMode::early: return "Early fusion";
  }
  return "?";
}

}  // namespace

std::string render_table(const std::vector<CVReport>& rows) {
  std::ostringstream os;
  const int label_w = 14, cell_w = 14;
  os << std::string("Method");
  os << std::string(static_cast<std::size_t>(label_w) - 6, ' ');
  for (const char* h : {"Accuracy", "Precision", "Recall"}) {
    std::string s(h);
    os << s << std::string(static_cast<std::size_t>(cell_w) - s.size(), ' ');
  }
  os << "\n";
  for (const CVReport& r : rows) {
    std::string label = row_label(r.mode);
    os << label << std::string(static_cast<std::size_t>(label_w) - label.size(), ' ');
    for (const Aggregate* a : {&r.accuracy, &r.precision, &r.recall}) {
      std::string cell = format_cell(*a);
      os << cell;
      // the ± glyph is two bytes in UTF-8; pad by display width
      const std::size_t display = cell.size() - 1;
      if (display < static_cast<std::size_t>(cell_w))
        os << std::string(static_cast<std::size_t>(cell_w) - display, ' ');
    }
    os << "\n";
  }
  return os.str();
}

nlohmann::json cv_report_to_json(const CVReport& report) {
  nlohmann::json folds = nlohmann::json::array();
  for (const FoldOutcome& f : report.folds) {
    nlohmann::json jf = {{"fold", f.fold}, {"failed", f.failed}};
    if (f.failed) {
      jf["error"] = f.error;
    } else {
      jf["accuracy"] = f.metrics.accuracy;
      jf["precision"] = f.metrics.precision;
      jf["recall"] = f.metrics.recall;
      jf["best_epoch"] = f.best_epoch;
      jf["confusion"] = f.metrics.confusion;
    }
    folds.push_back(std::move(jf));
  }
  return nlohmann::json{
      {"mode", fusion_name(report.mode)},
      {"fingerprint", report.config_fingerprint},
      {"failed_folds", report.failed_folds},
      {"folds", folds},
      {"aggregates",
       {{"accuracy", {{"mean", report.accuracy.mean}, {"std", report.accuracy.stddev}}},
        {"precision", {{"mean", report.precision.mean}, {"std", report.precision.stddev}}},
        {"recall", {{"mean", report.recall.mean}, {"std", report.recall.stddev}}}}},
      {"metric_conventions",
       {{"precision_recall", "macro over 3 classes"},
        {"zero_denominator", "contributes 0"},
        {"stddev", "sample standard deviation over folds"}}},
  };
}

}  // namespace gridvit
