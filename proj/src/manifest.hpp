#pragma once

#include <string>
#include <vector>

#include "volume.hpp"

namespace gridvit {

// One manifest line: paths are stored as written; resolve_path() joins
// relative ones against the manifest's directory.
struct ManifestEntry {
  std::string case_id;
  std::string t1_path;
  std::string t2_path;
  int label = 0;
};

// A fully loaded two-modality case.
struct ScanRecord {
  std::string case_id;
  Volume t1;
  Volume t2;
  int label = 0;
};

// Parses UTF-8 JSON lines {"id","t1","t2","label"}. Errors name the
// offending 1-based line number. Order is preserved.
std::vector<ManifestEntry> parse_manifest(const std::string& path);

std::string manifest_dir(const std::string& manifest_path);
std::string resolve_path(const std::string& base_dir, const std::string& path);

// Loads and min-max normalizes both modalities; T1/T2 extents must match.
ScanRecord load_scan(const ManifestEntry& entry, const std::string& base_dir);

std::vector<ScanRecord> load_scans(const std::vector<ManifestEntry>& entries,
                                   const std::string& base_dir);

}  // namespace gridvit
