/* gridvit — multimodal volumetric-scan transformer classifier.
 *
 * C API over the shared library. Every function returns one of the GV_*
 * status codes below (0 on success); gv_last_error() describes the most
 * recent failure on the calling thread. Handles are opaque and must be
 * released with their matching *_free/close call. Heap strings returned
 * through char** out-parameters are released with gv_string_free().
 */
#ifndef GRIDVIT_H
#define GRIDVIT_H

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes; the CLI reuses them as process exit codes. */
#define GV_OK 0
#define GV_ERR_CONFIG 2 /* bad configuration or validation failure */
#define GV_ERR_IO 3     /* filesystem / file-format failure */
#define GV_ERR_TRAIN 4  /* training aborted (non-finite loss/gradient) */
#define GV_ERR_EVAL 5   /* evaluation or inference failure */

const char* gv_version(void);

/* Message for the last failing call on this thread ("" if none). */
const char* gv_last_error(void);

/* Compute threads for the linear-algebra backend (default 1). */
void gv_set_threads(int n);

void gv_string_free(char* s);

/* ---- synthetic data ---------------------------------------------------- */

/* Generates a labeled synthetic dataset into out_dir (volumes/ + a
 * manifest.jsonl). spec_path may be NULL for the built-in default spec.
 * per_class (may be NULL) receives the case count per class. */
int gv_synth(const char* spec_path, const char* out_dir, int per_class[3]);

/* ---- datasets ----------------------------------------------------------- */

typedef struct gv_dataset gv_dataset;

int gv_dataset_open(const char* manifest_path, gv_dataset** out);
void gv_dataset_close(gv_dataset* d);
int gv_dataset_case_count(const gv_dataset* d);
/* Copies the case id at index into buf (NUL-terminated); returns GV_OK. */
int gv_dataset_case_id(const gv_dataset* d, int index, char* buf, int buf_len);
/* Returns the label (0/1/2) or a negative GV_ error code. */
int gv_dataset_label(const gv_dataset* d, int index);

/* ---- models ------------------------------------------------------------- */

typedef struct gv_model gv_model;

/* Randomly initialized model from a run-config JSON string. */
int gv_model_create(const char* run_config_json, gv_model** out);
int gv_model_load(const char* checkpoint_path, gv_model** out);
int gv_model_save(const gv_model* m, const char* path);
void gv_model_free(gv_model* m);
/* Total learnable parameter count. */
int gv_model_param_count(const gv_model* m, long long* out);
/* Model config as a JSON heap string. */
int gv_model_config_json(const gv_model* m, char** out_json);

/* Central-window prediction for one case of an open dataset. scores may be
 * NULL; otherwise scores_len must be >= the model's class count. */
int gv_predict(const gv_model* m, const gv_dataset* d, const char* case_id,
               double* scores, int scores_len, int* out_label);

/* ---- end-to-end runs ----------------------------------------------------- */

typedef struct gv_train_summary {
  double final_train_loss;
  double best_val_accuracy;
  int best_epoch;
  double inner_accuracy;
  double inner_precision;
  double inner_recall;
} gv_train_summary;

/* Trains per the run-config JSON, writes the checkpoint and an epoch log
 * (<checkpoint>.log.jsonl). summary may be NULL. */
int gv_train_run(const char* run_config_json, const char* out_checkpoint,
                 gv_train_summary* summary);

typedef struct gv_metrics {
  double accuracy;
  double precision;
  double recall;
  int evaluated;
  int skipped;
} gv_metrics;

/* Evaluates a checkpoint over every manifest case (central window). Writes
 * <out_prefix>.json when out_prefix is non-NULL. out_table (optional)
 * receives the formatted metrics table. */
int gv_eval_checkpoint_run(const char* run_config_json, const char* checkpoint,
                           const char* out_prefix, gv_metrics* out,
                           char** out_table);

/* Nested cross-validation per the run config; all_modes != 0 runs the four
 * input configurations (T1, T2, late, early) and emits a four-row report.
 * Writes <out_prefix>.json and <out_prefix>.txt when out_prefix is given. */
int gv_eval_cv_run(const char* run_config_json, int all_modes,
                   const char* out_prefix, char** out_table);

/* Recorded forward + attention-rollout export for one case: writes
 * <out_prefix>.pgm, <out_prefix>.csv, <out_prefix>.pred.json (per-tower
 * .t1/.t2 heatmaps for late-fusion checkpoints). out_label may be NULL. */
int gv_explain_run(const char* run_config_json, const char* checkpoint,
                   const char* case_id, const char* out_prefix, int* out_label);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* GRIDVIT_H */
