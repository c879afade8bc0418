#include "manifest.hpp"

#include <filesystem>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "error.hpp"

namespace gridvit {

std::vector<ManifestEntry> parse_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open manifest '" + path + "'");

  std::vector<ManifestEntry> entries;
  std::unordered_set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::parse, "manifest line " + std::to_string(line_no) +
                                 " is not valid JSON: " + e.what());
    }
    ManifestEntry e;
    for (const char* key : {"id", "t1", "t2", "label"}) {
      if (!j.contains(key)) {
        fail(ErrorCode::validation, "manifest line " + std::to_string(line_no) +
                                        " is missing key '" + key + "'");
      }
    }
    try {
      e.case_id = j.at("id").get<std::string>();
      e.t1_path = j.at("t1").get<std::string>();
      e.t2_path = j.at("t2").get<std::string>();
      e.label = j.at("label").get<int>();
    } catch (const nlohmann::json::exception& ex) {
      fail(ErrorCode::parse, "manifest line " + std::to_string(line_no) +
                                 " has a wrongly typed field: " + ex.what());
    }
    if (e.label < 0 || e.label > 2) {
      fail(ErrorCode::validation, "manifest line " + std::to_string(line_no) +
                                      ": label " + std::to_string(e.label) +
                                      " outside {0,1,2}");
    }
    if (!seen.insert(e.case_id).second) {
      fail(ErrorCode::validation, "manifest line " + std::to_string(line_no) +
                                      ": duplicate case_id '" + e.case_id + "'");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::string manifest_dir(const std::string& manifest_path) {
  return std::filesystem::path(manifest_path).parent_path().string();
}

std::string resolve_path(const std::string& base_dir, const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (std::filesystem::path(base_dir) / p).string();
}

ScanRecord load_scan(const ManifestEntry& entry, const std::string& base_dir) {
  ScanRecord rec;
  rec.case_id = entry.case_id;
  rec.label = entry.label;
  rec.t1 = normalize_volume(load_volume(resolve_path(base_dir, entry.t1_path)));
  rec.t2 = normalize_volume(load_volume(resolve_path(base_dir, entry.t2_path)));
  if (rec.t1.voxels.shape() != rec.t2.voxels.shape()) {
    fail(ErrorCode::validation,
         "case '" + entry.case_id + "': T1 extents " + rec.t1.voxels.shape_str() +
             " differ from T2 extents " + rec.t2.voxels.shape_str());
  }
  return rec;
}

std::vector<ScanRecord> load_scans(const std::vector<ManifestEntry>& entries,
                                   const std::string& base_dir) {
  std::vector<ScanRecord> out;
  out.reserve(entries.size());
  for (const ManifestEntry& e : entries) out.push_back(load_scan(e, base_dir));
  return out;
}

}  // namespace gridvit
