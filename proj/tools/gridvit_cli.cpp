// Command-line front end over the gridvit shared library. Every subcommand
// assembles one run-config JSON (file + flag overrides, flags win) and hands
// it to the C API; status codes are passed through as process exit codes.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridvit/gridvit.h"

namespace {

struct GlobalOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
  bool quiet = false;
};

int fail_with(int code) {
  std::cerr << "error: " << gv_last_error() << "\n";
  return code;
}

// Loads the config file (if any) and applies flag overrides.
bool merged_config(const GlobalOpts& g, nlohmann::json& out, int& err) {
  out = nlohmann::json::object();
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    if (!in) {
      std::cerr << "error: cannot open --config '" << g.config_path << "'\n";
      err = GV_ERR_CONFIG;
      return false;
    }
    try {
      in >> out;
    } catch (const nlohmann::json::exception& e) {
      std::cerr << "error: --config '" << g.config_path
                << "' is not valid JSON: " << e.what() << "\n";
      err = GV_ERR_CONFIG;
      return false;
    }
  }
  if (g.seed_set) out["seed"] = g.seed;
  return true;
}

void print_seed(const GlobalOpts& g, const nlohmann::json& cfg) {
  if (g.quiet) return;
  std::uint64_t seed = 7;
  if (cfg.contains("seed")) seed = cfg["seed"].get<std::uint64_t>();
  std::cout << "seed: " << seed << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridvit — grid-packed multimodal volume classifier"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "Run-config JSON file");
  auto* seed_opt =
      app.add_option("--seed", g.seed, "Override the top-level seed");
  app.add_option("--threads", g.threads, "Compute threads")->default_val(1);
  app.add_flag("--quiet", g.quiet, "Suppress progress output");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  std::string synth_spec, synth_out;
  synth->add_option("--spec", synth_spec, "Synthetic spec JSON (omit for defaults)");
  synth->add_option("--out", synth_out, "Output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "Train and write a checkpoint");
  std::string train_out = "model.gvck";
  train->add_option("--out", train_out, "Checkpoint path")->default_val("model.gvck");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint or run nested CV");
  std::string eval_ckpt, eval_out = "report";
  bool eval_cv = false, eval_all_modes = false;
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint to evaluate");
  eval->add_flag("--cv", eval_cv, "Run nested cross-validation");
  eval->add_flag("--all-modes", eval_all_modes,
                 "With --cv: run T1, T2, late, and early fusion");
  eval->add_option("--out", eval_out, "Report path prefix")->default_val("report");

  // explain
  auto* explain = app.add_subcommand("explain", "Attention-rollout heatmap for a case");
  std::string explain_ckpt, explain_case, explain_out = "explain";
  explain->add_option("--checkpoint", explain_ckpt, "Checkpoint path")->required();
  explain->add_option("--case", explain_case, "Case id from the manifest")->required();
  explain->add_option("--out", explain_out, "Output file prefix")->default_val("explain");

  CLI11_PARSE(app, argc, argv);
  g.seed_set = seed_opt->count() > 0;
  gv_set_threads(g.threads);

  if (synth->parsed()) {
    int per_class[3] = {0, 0, 0};
    const int rc = gv_synth(synth_spec.empty() ? nullptr : synth_spec.c_str(),
                            synth_out.c_str(), per_class);
    if (rc != GV_OK) return fail_with(rc);
    if (!g.quiet) {
      std::cout << "cases per class: normal=" << per_class[0]
                << " low-grade=" << per_class[1]
                << " high-grade=" << per_class[2] << "\n";
      std::cout << "manifest: " << synth_out << "/manifest.jsonl\n";
    }
    return 0;
  }

  nlohmann::json cfg;
  int err = 0;
  if (!merged_config(g, cfg, err)) return err;

  if (train->parsed()) {
    print_seed(g, cfg);
    gv_train_summary summary{};
    const int rc = gv_train_run(cfg.dump().c_str(), train_out.c_str(), &summary);
    if (rc != GV_OK) return fail_with(rc);
    if (!g.quiet) {
      std::printf("best epoch: %d\n", summary.best_epoch);
      std::printf("final train loss: %.6f\n", summary.final_train_loss);
      std::printf("inner validation: accuracy %.4f precision %.4f recall %.4f\n",
                  summary.inner_accuracy, summary.inner_precision,
                  summary.inner_recall);
      std::printf("checkpoint: %s\n", train_out.c_str());
    }
    return 0;
  }

  if (eval->parsed()) {
    print_seed(g, cfg);
    if (!eval_cv && eval_ckpt.empty()) {
      std::cerr << "error: eval needs --checkpoint or --cv\n";
      return GV_ERR_CONFIG;
    }
    if (eval_cv && !eval_ckpt.empty()) {
      std::cerr << "error: --checkpoint and --cv are mutually exclusive\n";
      return GV_ERR_CONFIG;
    }
    char* table = nullptr;
    int rc;
    if (eval_cv) {
      rc = gv_eval_cv_run(cfg.dump().c_str(), eval_all_modes ? 1 : 0,
                          eval_out.c_str(), &table);
    } else {
      rc = gv_eval_checkpoint_run(cfg.dump().c_str(), eval_ckpt.c_str(),
                                  eval_out.c_str(), nullptr, &table);
    }
    if (rc != GV_OK) return fail_with(rc);
    if (table) {
      std::cout << table;
      gv_string_free(table);
    }
    if (!g.quiet) std::cout << "report: " << eval_out << ".json\n";
    return 0;
  }

  if (explain->parsed()) {
    print_seed(g, cfg);
    int label = -1;
    const int rc = gv_explain_run(cfg.dump().c_str(), explain_ckpt.c_str(),
                                  explain_case.c_str(), explain_out.c_str(),
                                  &label);
    if (rc != GV_OK) return fail_with(rc);
    std::cout << "predicted class: " << label << "\n";
    if (!g.quiet) {
      std::cout << "outputs: " << explain_out << ".pgm " << explain_out
                << ".csv " << explain_out << ".pred.json\n";
    }
    return 0;
  }

  return 0;
}
