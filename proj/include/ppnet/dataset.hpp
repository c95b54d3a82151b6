#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ppnet {

struct IqaRecord {
  std::filesystem::path ref;
  std::filesystem::path dist;
  double mos = 0.0;
  double mos_std = 0.0;
  int row = 0;  // 1-based line in the manifest, 0 if built in memory
};

struct Manifest {
  std::string name;
  std::vector<IqaRecord> records;
};

// CSV with header ref,dist,mos,mos_std (any column order, extra columns
// ignored) and '#' comment lines. Relative paths resolve against base_dir.
Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir,
                        const std::string& name);
Manifest load_manifest(const std::filesystem::path& path);

// Writes paths relative to the manifest's directory when possible.
void write_manifest(const Manifest& m, const std::filesystem::path& path);

// Native layouts:
//  TID2008/TID2013: <root>/mos_with_names.txt ("<mos> <distorted name>"),
//    <root>/mos_std.txt (same order), reference_images/, distorted_images/.
//  KADID-10k: <root>/dmos.csv (dist_img,ref_img,dmos,var) and images/.
Manifest convert_tid(const std::filesystem::path& root);
Manifest convert_kadid(const std::filesystem::path& root);

}  // namespace ppnet
