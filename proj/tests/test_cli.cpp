// Spawns the installed CLI binary (path via GRIDVIT_CLI) and checks the
// exit-code contract and output artifacts of each subcommand.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

std::string cli() {
  const char* path = std::getenv("GRIDVIT_CLI");
  REQUIRE(path != nullptr);
  return path;
}

int run(const std::string& args, const std::string& out_file = "/dev/null") {
  const std::string cmd = cli() + " " + args + " >" + out_file + " 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("gridvit_cli_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Fixture {
  fs::path dir;
  std::string manifest;
  std::string cfg_path;

  explicit Fixture(const std::string& tag) : dir(temp_dir(tag)) {
    nlohmann::json spec = {{"cases_per_class", 3}, {"dz", 6},  {"h", 16},
                           {"w", 16},              {"seed", 5},
                           {"lesion_radius", {0.0, 3.0, 5.0}}};
    const std::string spec_path = (dir / "spec.json").string();
    std::ofstream(spec_path) << spec.dump();
    REQUIRE(run("synth --spec " + spec_path + " --out " + (dir / "data").string()) == 0);
    manifest = (dir / "data" / "manifest.jsonl").string();

    nlohmann::json cfg = {
        {"seed", 5},
        {"mode", "early"},
        {"folds", 2},
        {"data", {{"manifest", manifest}}},
        {"model",
         {{"k", 4},
          {"slice_h", 16},
          {"slice_w", 16},
          {"patch_size", 8},
          {"embed_dim", 16},
          {"layers", 1},
          {"heads", 2},
          {"mlp_ratio", 2}}},
        {"train", {{"epochs", 1}, {"batch_size", 4}, {"inner_fraction", 0.2}}},
    };
    cfg_path = (dir / "run.json").string();
    std::ofstream(cfg_path) << cfg.dump(2);
  }
};

}  // namespace

TEST_CASE("help lists every subcommand flag with defaults") {
  fs::path out = temp_dir("help") / "help.txt";
  CHECK(run("--help", out.string()) == 0);
  std::ifstream in(out);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  for (const char* want : {"synth", "train", "eval", "explain", "--config",
                           "--seed", "--threads", "--quiet"}) {
    CHECK(text.find(want) != std::string::npos);
  }

  fs::path out2 = temp_dir("help2") / "help.txt";
  CHECK(run("eval --help", out2.string()) == 0);
  std::ifstream in2(out2);
  std::string text2((std::istreambuf_iterator<char>(in2)), {});
  for (const char* want : {"--checkpoint", "--cv", "--all-modes", "--out"}) {
    CHECK(text2.find(want) != std::string::npos);
  }
  CHECK(text2.find("report") != std::string::npos);  // default value shown
}

TEST_CASE("synth exit codes") {
  fs::path dir = temp_dir("synth");
  SUBCASE("default spec succeeds") {
    CHECK(run("synth --out " + (dir / "out").string()) == 0);
    CHECK(fs::exists(dir / "out" / "manifest.jsonl"));
  }
  SUBCASE("invalid spec exits 2 and names the field") {
    const std::string bad = (dir / "bad.json").string();
    std::ofstream(bad) << R"({"lesion_radius": [-1, 1, 1]})";
    fs::path log = dir / "err.txt";
    CHECK(run("synth --spec " + bad + " --out " + (dir / "out2").string(),
              log.string()) == 2);
    std::ifstream in(log);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    CHECK(text.find("lesion_radius") != std::string::npos);
  }
}

TEST_CASE("train smoke run writes a loadable checkpoint") {
  Fixture fx("train");
  const std::string ckpt = (fx.dir / "m.gvck").string();
  fs::path log = fx.dir / "train.txt";
  CHECK(run("--config " + fx.cfg_path + " train --out " + ckpt, log.string()) == 0);
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(ckpt + ".log.jsonl"));
  std::ifstream in(log);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  CHECK(text.find("seed: 5") != std::string::npos);
  CHECK(text.find("checkpoint:") != std::string::npos);

  // And the eval subcommand accepts it.
  CHECK(run("--config " + fx.cfg_path + " eval --checkpoint " + ckpt +
            " --out " + (fx.dir / "report").string()) == 0);
  CHECK(fs::exists(fx.dir / "report.json"));
}

TEST_CASE("train without a manifest exits 2 naming the key") {
  fs::path dir = temp_dir("nomanifest");
  const std::string cfg_path = (dir / "cfg.json").string();
  std::ofstream(cfg_path) << R"({"seed": 1})";
  fs::path log = dir / "err.txt";
  CHECK(run("--config " + cfg_path + " train --out " + (dir / "x.gvck").string(),
            log.string()) == 2);
  std::ifstream in(log);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  CHECK(text.find("data.manifest") != std::string::npos);
}

TEST_CASE("eval requires a source and rejects shape mismatches with exit 5") {
  Fixture fx("evalerr");
  CHECK(run("--config " + fx.cfg_path + " eval") == 2);

  // Train a checkpoint whose geometry contradicts the evaluation data.
  nlohmann::json cfg = nlohmann::json::parse(std::ifstream(fx.cfg_path));
  cfg["model"]["slice_h"] = 32;
  cfg["model"]["slice_w"] = 32;
  const std::string other_cfg = (fx.dir / "other.json").string();
  // Build a second dataset at the other geometry to train against.
  nlohmann::json spec = {{"cases_per_class", 3}, {"dz", 6},  {"h", 32},
                         {"w", 32},              {"seed", 6},
                         {"lesion_radius", {0.0, 4.0, 7.0}}};
  const std::string spec_path = (fx.dir / "spec32.json").string();
  std::ofstream(spec_path) << spec.dump();
  REQUIRE(run("synth --spec " + spec_path + " --out " +
              (fx.dir / "data32").string()) == 0);
  cfg["data"]["manifest"] = (fx.dir / "data32" / "manifest.jsonl").string();
  std::ofstream(other_cfg) << cfg.dump(2);
  const std::string ckpt32 = (fx.dir / "m32.gvck").string();
  REQUIRE(run("--config " + other_cfg + " train --out " + ckpt32) == 0);

  // Evaluating the 32x32 checkpoint against the 16x16 manifest fails as an
  // evaluation error carrying both shapes.
  fs::path log = fx.dir / "mismatch.txt";
  CHECK(run("--config " + fx.cfg_path + " eval --checkpoint " + ckpt32,
            log.string()) == 5);
  std::ifstream in(log);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  CHECK(text.find("16x16") != std::string::npos);
  CHECK(text.find("32x32") != std::string::npos);
}

TEST_CASE("eval --cv emits a two-fold report") {
  Fixture fx("cv");
  fs::path log = fx.dir / "cv.txt";
  CHECK(run("--config " + fx.cfg_path + " eval --cv --out " +
            (fx.dir / "cv_report").string(), log.string()) == 0);
  CHECK(fs::exists(fx.dir / "cv_report.json"));
  CHECK(fs::exists(fx.dir / "cv_report.txt"));
  std::ifstream in(fx.dir / "cv_report.txt");
  std::string text((std::istreambuf_iterator<char>(in)), {});
  CHECK(text.find("±") != std::string::npos);
  nlohmann::json report =
      nlohmann::json::parse(std::ifstream(fx.dir / "cv_report.json"));
  CHECK(report.size() == 1);
  CHECK(report[0]["folds"].size() == 2);
}

TEST_CASE("explain writes heatmap artifacts and reports unknown cases") {
  Fixture fx("explain");
  const std::string ckpt = (fx.dir / "m.gvck").string();
  REQUIRE(run("--config " + fx.cfg_path + " train --out " + ckpt) == 0);

  fs::path log = fx.dir / "explain.txt";
  CHECK(run("--config " + fx.cfg_path + " explain --checkpoint " + ckpt +
            " --case case_004 --out " + (fx.dir / "exp").string(),
            log.string()) == 0);
  CHECK(fs::exists(fx.dir / "exp.pgm"));
  CHECK(fs::exists(fx.dir / "exp.csv"));
  CHECK(fs::exists(fx.dir / "exp.pred.json"));
  std::ifstream in(log);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  CHECK(text.find("predicted class:") != std::string::npos);

  // CSV patch count equals N from the checkpoint's config (k=4, 16x16, P=8).
  std::ifstream csv(fx.dir / "exp.csv");
  int lines = 0;
  std::string line;
  std::getline(csv, line);  // header
  while (std::getline(csv, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 16);

  fs::path log2 = fx.dir / "unknown.txt";
  CHECK(run("--config " + fx.cfg_path + " explain --checkpoint " + ckpt +
            " --case ghost --out " + (fx.dir / "exp2").string(),
            log2.string()) == 2);
  std::ifstream in2(log2);
  std::string text2((std::istreambuf_iterator<char>(in2)), {});
  CHECK(text2.find("case_000") != std::string::npos);  // lists known ids
}

TEST_CASE("eval and explain are idempotent byte for byte") {
  Fixture fx("idem_runs");
  const std::string ckpt = (fx.dir / "m.gvck").string();
  REQUIRE(run("--config " + fx.cfg_path + " train --out " + ckpt) == 0);

  auto bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
  };

  REQUIRE(run("--config " + fx.cfg_path + " eval --checkpoint " + ckpt +
              " --out " + (fx.dir / "r1").string()) == 0);
  REQUIRE(run("--config " + fx.cfg_path + " eval --checkpoint " + ckpt +
              " --out " + (fx.dir / "r2").string()) == 0);
  CHECK(bytes(fx.dir / "r1.json") == bytes(fx.dir / "r2.json"));

  REQUIRE(run("--config " + fx.cfg_path + " explain --checkpoint " + ckpt +
              " --case case_001 --out " + (fx.dir / "e1").string()) == 0);
  REQUIRE(run("--config " + fx.cfg_path + " explain --checkpoint " + ckpt +
              " --case case_001 --out " + (fx.dir / "e2").string()) == 0);
  for (const char* suffix : {".pgm", ".csv", ".pred.json"}) {
    CHECK(bytes(fx.dir / ("e1" + std::string(suffix))) ==
          bytes(fx.dir / ("e2" + std::string(suffix))));
  }
}

TEST_CASE("synth is idempotent byte for byte under one seed") {
  fs::path dir = temp_dir("idem");
  nlohmann::json spec = {{"cases_per_class", 2}, {"dz", 6}, {"h", 16},
                         {"w", 16},              {"seed", 8}};
  const std::string spec_path = (dir / "spec.json").string();
  std::ofstream(spec_path) << spec.dump();
  REQUIRE(run("synth --spec " + spec_path + " --out " + (dir / "a").string()) == 0);
  REQUIRE(run("synth --spec " + spec_path + " --out " + (dir / "b").string()) == 0);
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), dir / "a");
    std::ifstream fa(entry.path(), std::ios::binary);
    std::ifstream fb(dir / "b" / rel, std::ios::binary);
    REQUIRE(fb.good());
    std::string ba((std::istreambuf_iterator<char>(fa)), {});
    std::string bb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(ba == bb);
  }
}
