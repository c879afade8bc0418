// Acceptance suite: one criterion per function, one PASS/FAIL line each.
// Usage: acceptance <path-to-gridvit-cli>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "checkpoint.hpp"
#include "crossval.hpp"
#include "gradcheck.hpp"
#include "manifest.hpp"
#include "ops.hpp"
#include "rng.hpp"
#include "rollout.hpp"
#include "runner.hpp"
#include "synthetic.hpp"
#include "train.hpp"

using namespace gridvit;
namespace fs = std::filesystem;

namespace {

std::string g_cli_path;
fs::path g_work;

#define ACHECK(cond, msg)                                        \
  do {                                                           \
    if (!(cond)) throw std::runtime_error(std::string(msg));     \
  } while (0)

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  ACHECK(in.good(), "cannot read " + p.string());
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

int run_cli(const std::string& args) {
  const std::string cmd = g_cli_path + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

// The shared synthetic dataset: gen_synthetic defaults (20 cases per class,
// 32x32x12 volumes, seed 7).
std::vector<ScanRecord> shared_synthetic() {
  static std::vector<ScanRecord> cached;
  if (cached.empty()) {
    const fs::path dir = g_work / "synth20";
    SyntheticSpec spec;  // defaults, seed 7
    gen_synthetic(spec, dir.string());
    cached = load_scans(parse_manifest((dir / "manifest.jsonl").string()),
                        dir.string());
  }
  return cached;
}

// gridvit-tiny capacity on the synthetic 32x32 slice geometry.
ModelConfig tiny_on_synthetic() {
  ModelConfig mc;
  mc.k = 9;
  mc.slice_h = 32;
  mc.slice_w = 32;
  mc.patch_size = 16;
  mc.embed_dim = 192;
  mc.layers = 6;
  mc.heads = 3;
  mc.mlp_ratio = 4;
  return mc;
}

// ---- criterion 1: gradient correctness ------------------------------------

void criterion_gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();

  ModelConfig mc;  // 32x32 grid, P=8, C=2, D=16, L=2, heads=2, 3 classes
  mc.k = 4;
  mc.slice_h = 16;
  mc.slice_w = 16;
  mc.patch_size = 8;
  mc.embed_dim = 16;
  mc.layers = 2;
  mc.heads = 2;
  mc.mlp_ratio = 4;
  mc.fusion = FusionMode::early;
  ACHECK(mc.grid_h() == 32 && mc.grid_w() == 32, "grid must be 32x32");

  ModelParamsT<double> params64 = init_params(mc, 1234).cast<double>();
  std::vector<Tensor64> flat;
  for_each_param(params64, [&flat](const std::string&, const TensorT<double>& t) {
    flat.push_back(t);
  });

  Rng img_rng(99);
  GridSample sample;
  sample.k = mc.k;
  sample.label = 1;
  sample.image = Tensor({32, 32, 2});
  for (std::size_t i = 0; i < sample.image.size(); ++i)
    sample.image[i] = static_cast<float>(img_rng.uniform01());

  LossBuilder f = [&params64, &sample, &mc](Tape64& tape,
                                            const std::vector<Tape64::Id>& ids) {
    ModelLeaves<double> leaves = wire_leaves(params64, ids);
    Tape64::Id logits = classify_on_tape(tape, leaves, sample, mc, nullptr);
    return tape.cross_entropy(logits, {sample.label});
  };

  Rng rng(4242);
  GradCheckReport rep = grad_check(f, flat, 1e-5, 200, rng);

  const double elapsed = seconds_since(t0);
  std::printf("    max relative error %.3e over %d coordinates across %zu tensors (%.1fs)\n",
              rep.max_rel_error, rep.coords_checked, flat.size(), elapsed);
  ACHECK(rep.coords_checked >= 200, "need at least 200 sampled coordinates");
  ACHECK(rep.max_rel_error <= 1e-4, "gradient check error above 1e-4");
  ACHECK(elapsed < 120.0, "criterion exceeded its 2 minute budget");
}

// ---- criterion 2: single-batch overfit -------------------------------------

void criterion_single_batch_overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  auto scans = shared_synthetic();
  ModelConfig mc = tiny_on_synthetic();

  ModelParams params = init_params(mc, 7);
  auto refs = param_refs(params);
  AdamConfig adam_cfg;  // lr 0.003, the reference recipe value
  AdamState state = adam_init(refs, adam_cfg);

  std::vector<GridSample> batch;
  for (int i = 0; i < 8; ++i)
    batch.push_back(make_grid_sample(scans[static_cast<std::size_t>(i * 7 % 60)],
                                     i % 3, mc.k));

  double loss = 1e30;
  int reached_at = -1;
  for (int step = 1; step <= 500; ++step) {
    loss = train_step(params, batch, state, mc);
    if (loss < 0.01) {
      reached_at = step;
      break;
    }
  }
  const double elapsed = seconds_since(t0);
  std::printf("    cross-entropy %.6f at step %d (%.1fs)\n", loss,
              reached_at > 0 ? reached_at : 500, elapsed);
  ACHECK(reached_at > 0, "loss never fell below 0.01 within 500 steps");
  ACHECK(elapsed < 300.0, "criterion exceeded its 5 minute budget");
}

// ---- criterion 3: end-to-end synthetic classification ----------------------

void criterion_end_to_end_synthetic() {
  const auto t0 = std::chrono::steady_clock::now();
  auto scans = shared_synthetic();
  ModelConfig mc = tiny_on_synthetic();

  TrainConfig tc;
  tc.epochs = 30;  // within the 60-epoch bound
  tc.batch_size = 8;
  tc.lr = 0.003f;
  tc.seed = 7;
  tc.inner_fraction = 0.35;
  tc.augment = true;

  auto run_once = [&](const std::vector<ScanRecord>& records) {
    auto [pool, held_out] = stratified_holdout(records, 1.0 / 3.0, 7);
    auto [train_set, inner] = stratified_holdout(pool, tc.inner_fraction, 99);
    FitResult fr = fit(train_set, inner, mc, tc);
    EvalResult ev = evaluate(fr.params, mc, held_out);
    return ev.metrics.accuracy;
  };

  const double accuracy = run_once(scans);
  std::printf("    held-out accuracy %.4f within %d epochs (%.1fs)\n", accuracy,
              tc.epochs, seconds_since(t0));
  ACHECK(accuracy >= 0.95, "held-out accuracy below 0.95");

  // Leakage control: the same pipeline on permuted labels must stay near
  // chance.
  std::vector<ScanRecord> permuted = scans;
  std::vector<int> labels;
  for (const auto& s : permuted) labels.push_back(s.label);
  Rng perm_rng(Rng::derive(7, {0x9e21u}));
  perm_rng.shuffle(labels);
  for (std::size_t i = 0; i < permuted.size(); ++i)
    permuted[i].label = labels[i];
  const double permuted_accuracy = run_once(permuted);
  const double elapsed = seconds_since(t0);
  std::printf("    permuted-label accuracy %.4f (%.1fs total)\n",
              permuted_accuracy, elapsed);
  ACHECK(permuted_accuracy <= 0.55, "permuted-label accuracy above 0.55");
  ACHECK(elapsed < 900.0, "criterion exceeded its 15 minute budget");
}

// ---- criterion 4: fusion ablation harness parity ----------------------------

void criterion_fusion_ablation() {
  auto scans = shared_synthetic();

  // Harness parity only; modest capacity keeps all eight fits quick.
  ModelConfig mc;
  mc.k = 9;
  mc.slice_h = 32;
  mc.slice_w = 32;
  mc.patch_size = 16;
  mc.embed_dim = 64;
  mc.layers = 2;
  mc.heads = 2;
  mc.mlp_ratio = 2;

  TrainConfig tc;
  tc.epochs = 4;
  tc.batch_size = 8;
  tc.seed = 7;
  tc.inner_fraction = 0.2;

  std::vector<CVReport> reports;
  for (FusionMode mode : {FusionMode::t1, FusionMode::t2, FusionMode::late,
                          FusionMode::early}) {
    ModelConfig fold_mc = mc;
    fold_mc.fusion = mode;
    reports.push_back(nested_cv(scans, 2, fold_mc, tc, 7));
  }
  for (const CVReport& r : reports) {
    ACHECK(r.failed_folds == 0, "a fold failed for mode " + fusion_name(r.mode));
    ACHECK(r.folds.size() == 2, "expected two folds");
  }

  const std::string table = render_table(reports);
  std::printf("%s", table.c_str());
  // Four rows in Table-2 order and mean ± std formatting.
  const auto t1_at = table.find("T1");
  const auto t2_at = table.find("T2");
  const auto late_at = table.find("Late fusion");
  const auto early_at = table.find("Early fusion");
  ACHECK(t1_at != std::string::npos && t2_at != std::string::npos &&
             late_at != std::string::npos && early_at != std::string::npos,
         "report must carry all four configuration rows");
  ACHECK(t1_at < t2_at && t2_at < late_at && late_at < early_at,
         "rows out of order");
  ACHECK(table.find(" ± ") != std::string::npos, "mean ± std format missing");

  // Early fusion consumes 2 channels; late fusion reads out 2D.
  ModelConfig early_mc = mc;
  early_mc.fusion = FusionMode::early;
  ACHECK(early_mc.channels() == 2, "early fusion channel count must be 2");
  ModelParams early_params = zero_params(early_mc);
  ACHECK(early_params.tower.embed.dim(0) ==
             early_mc.patch_size * early_mc.patch_size * 2,
         "early patch embedding must consume 2 channels");

  ModelConfig late_mc = mc;
  late_mc.fusion = FusionMode::late;
  ACHECK(late_mc.readout_dim() == 2 * late_mc.embed_dim,
         "late readout must be 2D wide");
  ModelParams late_params = zero_params(late_mc);
  ACHECK(late_params.head_w.dim(0) == 2 * late_mc.embed_dim,
         "late fusion head must consume the 2D concatenated readout");
}

// ---- criterion 5: rollout invariants ----------------------------------------

void criterion_rollout_invariants() {
  Rng rng(555);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int layers = 1 + rng.uniform_int(6);
    const int heads = 1 + rng.uniform_int(4);
    const int tokens = 2 + rng.uniform_int(36);  // N+1 <= 37

    AttentionStack stack;
    stack.layers = layers;
    stack.heads = heads;
    stack.tokens = tokens;
    for (int i = 0; i < layers * heads; ++i) {
      Tensor m({tokens, tokens});
      for (int r = 0; r < tokens; ++r) {
        double sum = 0.0;
        for (int c = 0; c < tokens; ++c) {
          m.at(r, c) = static_cast<float>(rng.uniform(0.001, 1.0));
          sum += m.at(r, c);
        }
        for (int c = 0; c < tokens; ++c)
          m.at(r, c) = static_cast<float>(m.at(r, c) / sum);
      }
      stack.mats.push_back(std::move(m));
    }

    const std::vector<Tensor64> averaged = average_heads(stack);
    const Tensor64 full = rollout(averaged);
    for (int r = 0; r < tokens; ++r) {
      double sum = 0.0;
      for (int c = 0; c < tokens; ++c) sum += full.at(r, c);
      ACHECK(std::fabs(sum - 1.0) <= 1e-6, "rollout row sum strays from 1");
    }

    // Split-composition consistency at a random split.
    if (layers > 1) {
      const int split = 1 + rng.uniform_int(layers - 1);
      std::vector<Tensor64> head_part(averaged.begin(), averaged.begin() + split);
      std::vector<Tensor64> tail_part(averaged.begin() + split, averaged.end());
      Tensor64 combined = matmul(rollout(tail_part), rollout(head_part));
      for (std::size_t i = 0; i < combined.size(); ++i)
        ACHECK(std::fabs(combined[i] - full[i]) <= 1e-6,
               "split composition mismatch");
    }
    ++checked;
  }

  // Identity stacks roll out to the exact identity.
  for (int tokens : {2, 9, 37}) {
    AttentionStack stack;
    stack.layers = 4;
    stack.heads = 2;
    stack.tokens = tokens;
    for (int i = 0; i < 8; ++i) {
      Tensor m({tokens, tokens});
      for (int d = 0; d < tokens; ++d) m.at(d, d) = 1.0f;
      stack.mats.push_back(std::move(m));
    }
    Tensor64 r = rollout(average_heads(stack));
    for (int i = 0; i < tokens; ++i)
      for (int j = 0; j < tokens; ++j)
        ACHECK(r.at(i, j) == (i == j ? 1.0 : 0.0),
               "identity stack must roll out to the exact identity");
  }
  std::printf("    %d random stacks plus identity stacks verified\n", checked);
}

// ---- criterion 6: paper geometry --------------------------------------------

void criterion_geometry() {
  ModelConfig mc;  // defaults: k=9, 64x64 slices, P=16, gridvit-tiny capacity
  ACHECK(mc.k == 9 && mc.slice_h == 64 && mc.slice_w == 64 && mc.patch_size == 16,
         "default config must match the reference geometry");
  ACHECK(mc.patch_count() == 144, "N must be 144");
  ACHECK(mc.tokens() == 145, "token count must be 145");

  ModelParams params = init_params(mc, 3);
  Rng rng(31);
  Tensor image({mc.grid_h(), mc.grid_w(), mc.channels()});
  for (std::size_t i = 0; i < image.size(); ++i)
    image[i] = static_cast<float>(rng.uniform01());
  ForwardResult fwd = forward_classify(image, params, mc, true);
  ACHECK(fwd.logits.scores.size() == 3, "expected 3 class scores");
  ACHECK(fwd.attention.has_value(), "attention must be recorded");
  ACHECK(fwd.attention->tokens == 145, "recorded attention must span 145 tokens");
  ACHECK(fwd.attention->mats.size() ==
             static_cast<std::size_t>(mc.layers * mc.heads),
         "attention stack must hold layers x heads matrices");
  for (const Tensor& m : fwd.attention->mats)
    ACHECK(m.dim(0) == 145 && m.dim(1) == 145, "attention matrices must be 145x145");
  std::printf("    N=%d tokens=%d logits=%zu attention=%zu matrices\n",
              mc.patch_count(), mc.tokens(), fwd.logits.scores.size(),
              fwd.attention->mats.size());
}

// ---- criterion 7: CV harness -------------------------------------------------

void criterion_cv_harness() {
  std::vector<ManifestEntry> records;
  const int per_class[3] = {47, 46, 46};  // 139 records
  int n = 0;
  for (int cls = 0; cls < 3; ++cls)
    for (int i = 0; i < per_class[cls]; ++i, ++n)
      records.push_back({"case_" + std::to_string(n), "t1", "t2", cls});

  FoldPlan a = stratified_folds(records, 10, 71);
  FoldPlan b = stratified_folds(records, 10, 71);
  ACHECK(a.assignment == b.assignment, "same seed must give identical plans");

  std::set<std::string> seen;
  for (const auto& fold : a.members)
    for (const auto& id : fold)
      ACHECK(seen.insert(id).second, "case assigned to two folds");
  ACHECK(seen.size() == 139, "folds must cover all 139 cases");

  for (const auto& fold : a.members)
    ACHECK(fold.size() == 13 || fold.size() == 14,
           "fold sizes must be 13 or 14");

  for (int cls = 0; cls < 3; ++cls) {
    int lo = 1 << 30, hi = 0;
    std::vector<int> counts(10, 0);
    for (const auto& r : records)
      if (r.label == cls) counts[static_cast<std::size_t>(a.fold_of(r.case_id))]++;
    for (int c : counts) {
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
    ACHECK(hi - lo <= 1, "per-class fold counts must differ by at most 1");
  }
  std::printf("    10 folds over 139 cases: sizes ok, stratified, reproducible\n");
}

// ---- criterion 8: serialization ---------------------------------------------

void criterion_serialization() {
  const fs::path dir = g_work / "serialization";
  fs::create_directories(dir);

  // Volume round trip, bit exact.
  Rng rng(81);
  Volume v;
  v.modality = "T2";
  v.case_id = "case_rt";
  v.voxels = Tensor({5, 12, 10});
  for (std::size_t i = 0; i < v.voxels.size(); ++i)
    v.voxels[i] = static_cast<float>(rng.uniform(-2.0, 3.0));
  const std::string vpath = (dir / "v.rvf").string();
  save_volume(v, vpath);
  Volume vback = load_volume(vpath);
  ACHECK(vback.voxels.shape() == v.voxels.shape(), "volume shape changed");
  for (std::size_t i = 0; i < v.voxels.size(); ++i)
    ACHECK(vback.voxels[i] == v.voxels[i], "volume voxels changed");

  // Checkpoint round trip, bit exact, and identical forward outputs.
  ModelConfig mc;
  mc.k = 4;
  mc.slice_h = 16;
  mc.slice_w = 16;
  mc.patch_size = 8;
  mc.embed_dim = 32;
  mc.layers = 2;
  mc.heads = 2;
  mc.mlp_ratio = 2;
  ModelParams params = init_params(mc, 82);
  const std::string cpath = (dir / "m.gvck").string();
  save_checkpoint(params, mc, cpath);
  auto [loaded, lc] = load_checkpoint(cpath);

  std::vector<const Tensor*> orig, back;
  for_each_param(params, [&orig](const std::string&, const Tensor& t) {
    orig.push_back(&t);
  });
  for_each_param(loaded, [&back](const std::string&, const Tensor& t) {
    back.push_back(&t);
  });
  ACHECK(orig.size() == back.size(), "tensor count changed across reload");
  for (std::size_t t = 0; t < orig.size(); ++t)
    for (std::size_t i = 0; i < orig[t]->size(); ++i)
      ACHECK((*orig[t])[i] == (*back[t])[i], "checkpoint payload changed");

  Tensor image({mc.grid_h(), mc.grid_w(), mc.channels()});
  for (std::size_t i = 0; i < image.size(); ++i)
    image[i] = static_cast<float>(rng.uniform01());
  ForwardResult fa = forward_classify(image, params, mc);
  ForwardResult fb = forward_classify(image, loaded, lc);
  for (std::size_t i = 0; i < fa.logits.scores.size(); ++i)
    ACHECK(fa.logits.scores[i] == fb.logits.scores[i],
           "forward outputs differ after reload");

  // Corruption classes.
  auto corrupt = [&](const std::string& name,
                     const std::function<void(std::string&)>& mutate,
                     ErrorCode want) {
    std::string bytes = read_file(cpath);
    mutate(bytes);
    const std::string path = (dir / name).string();
    std::ofstream(path, std::ios::binary) << bytes;
    try {
      load_checkpoint(path);
      ACHECK(false, "corrupted checkpoint was accepted: " + name);
    } catch (const Error& e) {
      ACHECK(e.code() == want, "wrong error class for " + name);
    }
  };
  corrupt("bad_magic.gvck",
          [](std::string& b) { b.replace(0, 5, "WRONG"); },
          ErrorCode::bad_magic);
  corrupt("truncated.gvck",
          [](std::string& b) { b.resize(b.size() - 64); },
          ErrorCode::truncated);
  corrupt("contradiction.gvck",
          [](std::string& b) {
            const std::string needle = "\"embed_dim\":32";
            const auto at = b.find(needle);
            ACHECK(at != std::string::npos, "header layout unexpected");
            b.replace(at, needle.size(), "\"embed_dim\":64");
          },
          ErrorCode::shape_contradiction);
  std::printf("    volume + checkpoint round trips bit-exact; corruption rejected\n");
}

// ---- criterion 9: CLI determinism ---------------------------------------------

void criterion_cli_determinism() {
  const fs::path dir = g_work / "cli_determinism";
  fs::create_directories(dir);

  // Small dataset and config for two full training runs.
  SyntheticSpec spec;
  spec.cases_per_class = 4;
  spec.dz = 6;
  spec.h = 16;
  spec.w = 16;
  spec.lesion_radius = {0.0, 3.0, 5.0};
  spec.seed = 91;
  const fs::path data = dir / "data";
  gen_synthetic(spec, data.string());

  nlohmann::json cfg = {
      {"seed", 5},
      {"mode", "early"},
      {"folds", 2},
      {"data", {{"manifest", (data / "manifest.jsonl").string()}}},
      {"model",
       {{"k", 4},
        {"slice_h", 16},
        {"slice_w", 16},
        {"patch_size", 8},
        {"embed_dim", 32},
        {"layers", 2},
        {"heads", 2},
        {"mlp_ratio", 2}}},
      {"train", {{"epochs", 2}, {"batch_size", 4}, {"inner_fraction", 0.2}}},
  };
  const std::string cfg_path = (dir / "run.json").string();
  std::ofstream(cfg_path) << cfg.dump(2);

  const std::string ck1 = (dir / "run1.gvck").string();
  const std::string ck2 = (dir / "run2.gvck").string();
  ACHECK(run_cli("--config " + cfg_path + " --seed 5 train --out " + ck1) == 0,
         "first training run failed");
  ACHECK(run_cli("--config " + cfg_path + " --seed 5 train --out " + ck2) == 0,
         "second training run failed");

  ACHECK(read_file(ck1) == read_file(ck2), "checkpoints differ across runs");
  ACHECK(read_file(ck1 + ".log.jsonl") == read_file(ck2 + ".log.jsonl"),
         "train logs differ across runs");
  std::printf("    two training runs: checkpoints and logs byte-identical\n");
}

struct Criterion {
  int id;
  const char* title;
  std::function<void()> run;
};

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <path-to-gridvit-cli>\n");
    return 64;
  }
  g_cli_path = argv[1];
  set_blas_threads(1);

  g_work = fs::temp_directory_path() / "gridvit_acceptance";
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  const std::vector<Criterion> criteria = {
      {1, "gradient correctness (full tiny model, 64-bit)", criterion_gradient_correctness},
      {2, "single-batch overfit (gridvit-tiny, lr 0.003)", criterion_single_batch_overfit},
      {3, "end-to-end synthetic classification + leakage control", criterion_end_to_end_synthetic},
      {4, "fusion ablation harness parity (T1/T2/late/early)", criterion_fusion_ablation},
      {5, "attention rollout invariants (100 random stacks)", criterion_rollout_invariants},
      {6, "reference geometry: N=144, 145 tokens end to end", criterion_geometry},
      {7, "stratified 10-fold plan over 139 cases", criterion_cv_harness},
      {8, "serialization round trips and corruption rejection", criterion_serialization},
      {9, "CLI training determinism (byte-identical outputs)", criterion_cli_determinism},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run();
      std::printf("PASS criterion %d: %s (%.1fs)\n", c.id, c.title,
                  seconds_since(t0));
    } catch (const std::exception& e) {
      ++failures;
      std::printf("FAIL criterion %d: %s — %s\n", c.id, c.title, e.what());
    }
    std::fflush(stdout);
  }

  if (failures == 0) {
    std::printf("all %zu acceptance criteria passed\n", criteria.size());
  } else {
    std::printf("%d of %zu acceptance criteria failed\n", failures,
                criteria.size());
  }
  return failures == 0 ? 0 : 1;
}
