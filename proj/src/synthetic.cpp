#include "synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "error.hpp"
#include "rng.hpp"
#include "volume.hpp"

namespace gridvit {

void SyntheticSpec::validate() const {
  if (cases_per_class < 0) {
    fail(ErrorCode::validation, "synthetic spec field 'cases_per_class' must be >= 0");
  }
  if (dz < 1 || h < 1 || w < 1) {
    fail(ErrorCode::validation, "synthetic spec fields 'dz'/'h'/'w' must be >= 1");
  }
  for (int c = 0; c < 3; ++c) {
    if (lesion_radius[static_cast<std::size_t>(c)] < 0.0) {
      fail(ErrorCode::validation,
           "synthetic spec field 'lesion_radius[" + std::to_string(c) +
               "]' must be >= 0");
    }
    if (lesion_contrast[static_cast<std::size_t>(c)] < 0.0) {
      fail(ErrorCode::validation,
           "synthetic spec field 'lesion_contrast[" + std::to_string(c) +
               "]' must be >= 0");
    }
  }
  if (noise < 0.0) {
    fail(ErrorCode::validation, "synthetic spec field 'noise' must be >= 0");
  }
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  try {
    if (j.contains("cases_per_class")) s.cases_per_class = j.at("cases_per_class").get<int>();
    if (j.contains("dz")) s.dz = j.at("dz").get<int>();
    if (j.contains("h")) s.h = j.at("h").get<int>();
    if (j.contains("w")) s.w = j.at("w").get<int>();
    if (j.contains("lesion_radius"))
      s.lesion_radius = j.at("lesion_radius").get<std::array<double, 3>>();
    if (j.contains("lesion_contrast"))
      s.lesion_contrast = j.at("lesion_contrast").get<std::array<double, 3>>();
    if (j.contains("noise")) s.noise = j.at("noise").get<double>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse, std::string("bad synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

SyntheticSpec load_synthetic_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open synthetic spec '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse, "synthetic spec '" + path + "' is not valid JSON: " + e.what());
  }
  return synthetic_spec_from_json(j);
}

nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec) {
  return nlohmann::json{{"cases_per_class", spec.cases_per_class},
                        {"dz", spec.dz},
                        {"h", spec.h},
                        {"w", spec.w},
                        {"lesion_radius", spec.lesion_radius},
                        {"lesion_contrast", spec.lesion_contrast},
                        {"noise", spec.noise},
                        {"seed", spec.seed}};
}

namespace {

// One case's anatomy, shared by both modalities.
struct LesionGeometry {
  double radius = 0.0;
  double cz = 0.0, cy = 0.0, cx = 0.0;
};

LesionGeometry draw_geometry(const SyntheticSpec& spec, int label, Rng& rng) {
  LesionGeometry g;
  g.radius = spec.lesion_radius[static_cast<std::size_t>(label)] *
             rng.uniform(0.95, 1.05);
  g.cz = 0.5 * (spec.dz - 1) + rng.uniform(-0.5, 0.5);
  g.cy = 0.5 * (spec.h - 1) + rng.uniform(-1.5, 1.5);
  g.cx = 0.5 * (spec.w - 1) + rng.uniform(-1.5, 1.5);
  return g;
}

// Smooth anatomy-like backdrop plus an optional bright ellipsoidal lesion.
// The flat-top (1 - d^4) lesion profile keeps the per-slice mean
// contribution high relative to its radius.
Volume make_volume(const SyntheticSpec& spec, const std::string& case_id,
                   const std::string& modality, int label,
                   const LesionGeometry& geom, Rng& rng) {
  const bool is_t2 = modality == "T2";
  const double bg_base = (is_t2 ? 0.22 : 0.25) + rng.uniform(-0.02, 0.02);
  const double bg_bump = is_t2 ? 0.08 : 0.10;
  const double contrast = spec.lesion_contrast[static_cast<std::size_t>(label)] *
                          (is_t2 ? 1.1 : 1.0);
  const double rz = std::max(1.5, geom.radius / 3.0);

  Volume v;
  v.modality = modality;
  v.case_id = case_id;
  v.voxels = Tensor({spec.dz, spec.h, spec.w});

  const double half_h = 0.5 * spec.h, half_w = 0.5 * spec.w;
  for (int z = 0; z < spec.dz; ++z) {
    for (int y = 0; y < spec.h; ++y) {
      for (int x = 0; x < spec.w; ++x) {
        const double ry = (y - half_h) / half_h;
        const double rx = (x - half_w) / half_w;
        double val = bg_base + bg_bump * (1.0 - 0.5 * (ry * ry + rx * rx));
        if (geom.radius > 0.0 && contrast > 0.0) {
          const double dz_n = (z - geom.cz) / rz;
          const double dy_n = (y - geom.cy) / geom.radius;
          const double dx_n = (x - geom.cx) / geom.radius;
          const double d2 = dz_n * dz_n + dy_n * dy_n + dx_n * dx_n;
          if (d2 < 1.0) val += contrast * (1.0 - d2 * d2);
        }
        val += rng.normal(0.0, spec.noise);
        v.voxels.at(z, y, x) = static_cast<float>(std::max(0.0, val));
      }
    }
  }
  return v;
}

}  // namespace

SynthResult gen_synthetic(const SyntheticSpec& spec, const std::string& out_dir) {
  spec.validate();

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "volumes", ec);
  if (ec) {
    fail(ErrorCode::io, "cannot create output directory '" + out_dir +
                            "': " + ec.message());
  }

  SynthResult result;
  result.manifest_path = (fs::path(out_dir) / "manifest.jsonl").string();
  std::ofstream manifest(result.manifest_path);
  if (!manifest) {
    fail(ErrorCode::io, "cannot write manifest '" + result.manifest_path + "'");
  }

  int case_no = 0;
  for (int label = 0; label < 3; ++label) {
    for (int i = 0; i < spec.cases_per_class; ++i, ++case_no) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "case_%03d", case_no);
      const std::string case_id = buf;
      Rng rng(Rng::derive(spec.seed, {Rng::hash_str(case_id),
                                      static_cast<std::uint64_t>(label)}));
      const LesionGeometry geom = draw_geometry(spec, label, rng);
      const std::string t1_rel = "volumes/" + case_id + "_t1.rvf";
      const std::string t2_rel = "volumes/" + case_id + "_t2.rvf";
      save_volume(make_volume(spec, case_id, "T1", label, geom, rng),
                  (fs::path(out_dir) / t1_rel).string());
      save_volume(make_volume(spec, case_id, "T2", label, geom, rng),
                  (fs::path(out_dir) / t2_rel).string());
      manifest << nlohmann::json{{"id", case_id},
                                 {"t1", t1_rel},
                                 {"t2", t2_rel},
                                 {"label", label}}
                      .dump()
               << "\n";
      result.per_class[static_cast<std::size_t>(label)] += 1;
    }
  }
  if (!manifest) fail(ErrorCode::io, "short write to '" + result.manifest_path + "'");
  return result;
}

}  // namespace gridvit
