#include "gridvit/gridvit.h"

#include <cstring>
#include <new>
#include <string>

#include "checkpoint.hpp"
#include "error.hpp"
#include "manifest.hpp"
#include "model.hpp"
#include "ops.hpp"
#include "runconfig.hpp"
#include "runner.hpp"
#include "synthetic.hpp"
#include "train.hpp"

using namespace gridvit;

namespace {

thread_local std::string g_last_error;

void clear_error() { g_last_error.clear(); }

int handle_exception() {
  try {
    throw;
  } catch (const Error& e) {
    g_last_error = e.what();
    return e.coarse_code();
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return GV_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return GV_ERR_EVAL;
  } catch (...) {
    g_last_error = "unknown error";
    return GV_ERR_EVAL;
  }
}

RunConfig parse_config_arg(const char* run_config_json) {
  if (!run_config_json) {
    fail(ErrorCode::config, "run config JSON must not be null");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(run_config_json);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::config, std::string("run config is not valid JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

char* heap_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

struct gv_dataset {
  std::string manifest_path;
  std::vector<ManifestEntry> entries;
  std::string base_dir;
};

struct gv_model {
  ModelParams params;
  ModelConfig config;
};

extern "C" {

const char* gv_version(void) { return "0.1.0"; }

const char* gv_last_error(void) { return g_last_error.c_str(); }

void gv_set_threads(int n) { set_blas_threads(n); }

void gv_string_free(char* s) { delete[] s; }

int gv_synth(const char* spec_path, const char* out_dir, int per_class[3]) {
  clear_error();
  try {
    if (!out_dir) fail(ErrorCode::config, "out_dir must not be null");
    SyntheticSpec spec;
    if (spec_path) spec = load_synthetic_spec(spec_path);
    SynthResult res = gen_synthetic(spec, out_dir);
    if (per_class) {
      for (int i = 0; i < 3; ++i)
        per_class[i] = res.per_class[static_cast<std::size_t>(i)];
    }
    return GV_OK;
  } catch (...) {
    return handle_exception();
  }
}

int gv_dataset_open(const char* manifest_path, gv_dataset** out) {
  clear_error();
  try {
    if (!manifest_path || !out) {
      fail(ErrorCode::config, "manifest_path and out must not be null");
    }
    auto d = std::make_unique<gv_dataset>();
    d->manifest_path = manifest_path;
    d->entries = parse_manifest(manifest_path);
    d->base_dir = manifest_dir(manifest_path);
    *out = d.release();
    return GV_OK;
  } catch (...) {
    return handle_exception();
  }
}

void gv_dataset_close(gv_dataset* d) { delete d; }

int gv_dataset_case_count(const gv_dataset* d) {
  return d ? static_cast<int>(d->entries.size()) : -GV_ERR_CONFIG;
}

int gv_dataset_case_id(const gv_dataset* d, int index, char* buf, int buf_len) {
  clear_error();
  try {
    if (!d || !buf || index < 0 || index >= static_cast<int>(d->entries.size())) {
      fail(ErrorCode::validation, "bad dataset index or buffer");
    }
    const std::string& id = d->entries[static_cast<std::size_t>(index)].case_id;
    if (buf_len <= static_cast<int>(id.size())) {
      fail(ErrorCode::validation, "case id buffer too small");
    }
    std::memcpy(buf, id.c_str(), id.size() + 1);
    return GV_OK;
  } catch (...) {
    return handle_exception();
  }
}

int gv_dataset_label(const gv_dataset* d, int index) {
  if (!d || index < 0 || index >= static_cast<int>(d->entries.size())) {
    g_last_error = "bad dataset index";
    return -GV_ERR_CONFIG;
  }
  return d->entries[static_cast<std::size_t>(index)].label;
}

int gv_model_create(const char* run_config_json, gv_model** out) {
  clear_error();
  try {
    if (!out) fail(ErrorCode::config, "out must not be null");
    RunConfig rc = parse_config_arg(run_config_json);
    auto m = std::make_unique<gv_model>();
    m->config = rc.model;
    m->params = init_params(rc.model, rc.seed);
    *out = m.release();
    return GV_OK;
  } catch (...) {
    return handle_exception();
  }
}

int gv_model_load(const char* checkpoint_path, gv_model** out) {
  clear_error();
  try {
    if (!checkpoint_path || !out) {
      fail(ErrorCode::config, "checkpoint_path and out must not be null");
    }
    auto loaded = load_checkpoint(checkpoint_path);
    auto m = std::make_unique<gv_model>();
    m->params = std::move(loaded.first);
    m->config = loaded.second;
    *out = m.release();
    return GV_OK;
  } catch (...) {
    return handle_exception();
  }
}

int gv_model_save(const gv_model* m, const char* path) {
  clear_error();
  try {
    if (!m || !path) fail(ErrorCode::config, "model and path must not be null");
    save_checkpoint(m->params, m->config, path);
    return GV_OK;
  } catch (...) {
    return handle_exception();
  }
}

void gv_model_free(gv_model* m) { delete m; }

int gv_model_param_count(const gv_model* m, long long* out) {
  clear_error();
  try {
    if (!m || !out) fail(ErrorCode::config, "model and out must not be null");
    *out = param_census(m->config);
    return GV_OK;
  } catch (...) {
    return handle_exception();
  }
}

int gv_model_config_json(const gv_model* m, char** out_json) {
  clear_error();
  try {
    if (!m || !out_json) fail(ErrorCode::config, "model and out must not be null");
    *out_json = heap_string(model_config_to_json(m->config).dump());
    return GV_OK;
  } catch (...) {
    return handle_exception();
  }
}

int gv_predict(const gv_model* m, const gv_dataset* d, const char* case_id,
               double* scores, int scores_len, int* out_label) {
  clear_error();
  try {
    if (!m || !d || !case_id) {
      fail(ErrorCode::config, "model, dataset, and case_id must not be null");
    }
    const ManifestEntry* entry = nullptr;
    for (const ManifestEntry& e : d->entries) {
      if (e.case_id == case_id) {
        entry = &e;
        break;
      }
    }
    if (!entry) {
      fail(ErrorCode::unknown_case,
           std::string("case '") + case_id + "' is not in the manifest");
    }
    ScanRecord rec = load_scan(*entry, d->base_dir);
    if (rec.t1.dz() < m->config.k) {
      fail(ErrorCode::eval_failure,
           "case '" + rec.case_id + "' is too shallow for k = " +
               std::to_string(m->config.k));
    }
    GridSample sample = make_grid_sample(
        rec, central_window(rec.t1.dz(), m->config.k), m->config.k);
    ForwardResult fwd = classify_scan(sample, m->params, m->config, false);
    if (scores) {
      if (scores_len < m->config.num_classes) {
        fail(ErrorCode::validation, "scores buffer too small");
      }
      for (int i = 0; i < m->config.num_classes; ++i) {
        scores[i] = static_cast<double>(
            fwd.logits.scores[static_cast<std::size_t>(i)]);
      }
    }
    if (out_label) *out_label = fwd.logits.argmax();
    return GV_OK;
  } catch (...) {
    return handle_exception();
  }
}

int gv_train_run(const char* run_config_json, const char* out_checkpoint,
                 gv_train_summary* summary) {
  clear_error();
  try {
    if (!out_checkpoint) fail(ErrorCode::config, "out_checkpoint must not be null");
    RunConfig rc = parse_config_arg(run_config_json);
    TrainOutcome outcome = run_train(rc, out_checkpoint);
    if (summary) {
      summary->final_train_loss = outcome.final_train_loss;
      summary->best_val_accuracy = outcome.best_val_accuracy;
      summary->best_epoch = outcome.best_epoch;
      summary->inner_accuracy = outcome.inner_metrics.accuracy;
      summary->inner_precision = outcome.inner_metrics.precision;
      summary->inner_recall = outcome.inner_metrics.recall;
    }
    return GV_OK;
  } catch (...) {
    return handle_exception();
  }
}

int gv_eval_checkpoint_run(const char* run_config_json, const char* checkpoint,
                           const char* out_prefix, gv_metrics* out,
                           char** out_table) {
  clear_error();
  try {
    if (!checkpoint) fail(ErrorCode::config, "checkpoint must not be null");
    RunConfig rc = parse_config_arg(run_config_json);
    EvalOutcome outcome =
        run_eval_checkpoint(rc, checkpoint, out_prefix ? out_prefix : "");
    if (out) {
      out->accuracy = outcome.metrics.accuracy;
      out->precision = outcome.metrics.precision;
      out->recall = outcome.metrics.recall;
      out->evaluated = outcome.evaluated;
      out->skipped = outcome.skipped;
    }
    if (out_table) *out_table = heap_string(outcome.table);
    return GV_OK;
  } catch (...) {
    return handle_exception();
  }
}

int gv_eval_cv_run(const char* run_config_json, int all_modes,
                   const char* out_prefix, char** out_table) {
  clear_error();
  try {
    RunConfig rc = parse_config_arg(run_config_json);
    CvOutcome outcome =
        run_eval_cv(rc, all_modes != 0, out_prefix ? out_prefix : "");
    if (out_table) *out_table = heap_string(outcome.table);
    return GV_OK;
  } catch (...) {
    return handle_exception();
  }
}

int gv_explain_run(const char* run_config_json, const char* checkpoint,
                   const char* case_id, const char* out_prefix, int* out_label) {
  clear_error();
  try {
    if (!checkpoint || !case_id || !out_prefix) {
      fail(ErrorCode::config, "checkpoint, case_id, and out_prefix must not be null");
    }
    RunConfig rc = parse_config_arg(run_config_json);
    ExplainOutcome outcome = run_explain(rc, checkpoint, case_id, out_prefix);
    if (out_label) *out_label = outcome.predicted;
    return GV_OK;
  } catch (...) {
    return handle_exception();
  }
}

}  // extern "C"
