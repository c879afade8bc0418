#include "volume.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "error.hpp"

namespace gridvit {

namespace {

constexpr char kMagic[] = "RVF1\n";

void check_modality(const std::string& m) {
  if (m != "T1" && m != "T2") {
    fail(ErrorCode::validation, "modality must be T1 or T2, got '" + m + "'");
  }
}

}  // namespace

void save_volume(const Volume& v, const std::string& path) {
  check_modality(v.modality);
  if (!v.voxels.all_finite()) {
    fail(ErrorCode::non_finite, "refusing to save non-finite voxels for case " +
                                    v.case_id);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot open '" + path + "' for writing");

  nlohmann::json header = {
      {"dz", v.dz()},       {"h", v.height()},        {"w", v.width()},
      {"dtype", "f32le"},   {"modality", v.modality}, {"case_id", v.case_id},
  };
  out.write(kMagic, 5);
  const std::string hs = header.dump();
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  out.put('\n');
  out.write(reinterpret_cast<const char*>(v.voxels.data()),
            static_cast<std::streamsize>(v.voxels.size() * sizeof(float)));
  if (!out) fail(ErrorCode::io, "short write to '" + path + "'");
}

Volume load_volume(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open volume file '" + path + "'");

  char magic[5];
  in.read(magic, 5);
  if (in.gcount() != 5 || std::memcmp(magic, kMagic, 5) != 0) {
    fail(ErrorCode::bad_magic, "'" + path + "' is not an RVF1 volume file");
  }

  std::string header_line;
  if (!std::getline(in, header_line)) {
    fail(ErrorCode::truncated, "'" + path + "' ends before the header line");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse, "bad RVF1 header in '" + path + "': " + e.what());
  }

  Volume v;
  try {
    const int dz = header.at("dz").get<int>();
    const int h = header.at("h").get<int>();
    const int w = header.at("w").get<int>();
    if (dz < 1 || h < 1 || w < 1) {
      fail(ErrorCode::validation, "non-positive extents in '" + path + "'");
    }
    if (header.at("dtype").get<std::string>() != "f32le") {
      fail(ErrorCode::parse, "unsupported dtype in '" + path + "'");
    }
    v.modality = header.at("modality").get<std::string>();
    v.case_id = header.at("case_id").get<std::string>();
    v.voxels = Tensor({dz, h, w});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse,
         "missing RVF1 header field in '" + path + "': " + e.what());
  }
  check_modality(v.modality);

  in.read(reinterpret_cast<char*>(v.voxels.data()),
          static_cast<std::streamsize>(v.voxels.size() * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != v.voxels.size() * sizeof(float)) {
    fail(ErrorCode::truncated,
         "'" + path + "' payload is shorter than dz*h*w voxels (" +
             std::to_string(in.gcount()) + " of " +
             std::to_string(v.voxels.size() * sizeof(float)) + " bytes)");
  }
  if (!v.voxels.all_finite()) {
    fail(ErrorCode::non_finite, "'" + path + "' contains non-finite voxels");
  }
  return v;
}

Volume normalize_volume(const Volume& v) {
  Volume out = v;
  const float lo = v.voxels.min_value();
  const float hi = v.voxels.max_value();
  const float range = hi - lo;
  if (range <= 0.0f) {
    for (std::size_t i = 0; i < out.voxels.size(); ++i) out.voxels[i] = 0.0f;
    return out;
  }
  const float inv = 1.0f / range;
  for (std::size_t i = 0; i < out.voxels.size(); ++i) {
    out.voxels[i] = (v.voxels[i] - lo) * inv;
  }
  return out;
}

}  // namespace gridvit
