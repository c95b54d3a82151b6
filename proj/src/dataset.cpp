#include "ppnet/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ppnet/diagnostics.hpp"
#include "ppnet/errors.hpp"

namespace fs = std::filesystem;

namespace ppnet {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// One CSV line; double quotes protect commas and "" escapes a quote.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

bool parse_number(const std::string& s, double& v) {
  const char* end = s.data() + s.size();
  auto r = std::from_chars(s.data(), end, v);
  return r.ec == std::errc() && r.ptr == end && std::isfinite(v);
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

// Case-insensitive lookup of a file name inside dir.
fs::path find_ci(const fs::path& dir, const std::string& name) {
  const fs::path direct = dir / name;
  if (fs::exists(direct)) return direct;
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
  if (fs::is_directory(dir)) {
    for (const auto& e : fs::directory_iterator(dir)) {
      std::string n = e.path().filename().string();
      std::transform(n.begin(), n.end(), n.begin(), ::tolower);
      if (n == lower) return e.path();
    }
  }
  return direct;
}

}  // namespace

Manifest parse_manifest(const std::string& text, const fs::path& base_dir, const std::string& name) {
  Manifest m;
  m.name = name;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::map<std::string, int> col;
  bool have_header = false;
  std::map<std::pair<std::string, std::string>, int> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = split_csv(t);
    if (!have_header) {
      for (std::size_t k = 0; k < fields.size(); ++k) col[fields[k]] = static_cast<int>(k);
      for (const char* req : {"ref", "dist", "mos", "mos_std"}) {
        if (!col.count(req)) {
          throw ParseError(name + ": line " + std::to_string(line_no) + ": missing column '" + req +
                           "' (header must contain ref,dist,mos,mos_std)");
        }
      }
      have_header = true;
      continue;
    }
    const auto where = name + ": row " + std::to_string(line_no);
    auto field = [&](const char* key) -> const std::string& {
      const int k = col[key];
      if (k >= static_cast<int>(fields.size())) {
        throw ParseError(where + ": missing value for column '" + key + "'");
      }
      return fields[k];
    };
    IqaRecord r;
    r.row = line_no;
    const auto& ref = field("ref");
    const auto& dist = field("dist");
    if (ref.empty() || dist.empty()) throw ParseError(where + ": empty image path");
    if (!parse_number(field("mos"), r.mos)) {
      throw ParseError(where + ": mos '" + field("mos") + "' is not a finite number");
    }
    if (!parse_number(field("mos_std"), r.mos_std)) {
      throw ParseError(where + ": mos_std '" + field("mos_std") + "' is not a finite number");
    }
    if (r.mos_std < 0.0) throw ParseError(where + ": mos_std must be >= 0");
    r.ref = resolve(base_dir, ref);
    r.dist = resolve(base_dir, dist);
    const auto key = std::make_pair(r.ref.string(), r.dist.string());
    if (auto it = seen.find(key); it != seen.end()) {
      throw ParseError(where + ": duplicate (ref, dist) pair, first seen on row " +
                       std::to_string(it->second));
    }
    seen[key] = line_no;
    m.records.push_back(std::move(r));
  }
  if (!have_header) throw ParseError(name + ": missing header ref,dist,mos,mos_std");
  if (m.records.empty()) throw ParseError(name + ": manifest has no records");
  return m;
}

Manifest load_manifest(const fs::path& path) {
  const auto text = read_text(path);
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return parse_manifest(text, base, path.string());
}

void write_manifest(const Manifest& m, const fs::path& path) {
  auto base = fs::absolute(path).parent_path();
  auto rel = [&](const fs::path& p) {
    std::error_code ec;
    auto r = fs::relative(fs::absolute(p), base, ec);
    return (ec || r.empty()) ? p.string() : r.generic_string();
  };
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write manifest " + path.string());
  out << "# " << m.name << "\n";
  out << "ref,dist,mos,mos_std\n";
  out.precision(17);
  for (const auto& r : m.records) {
    out << csv_field(rel(r.ref)) << ',' << csv_field(rel(r.dist)) << ',' << r.mos << ','
        << r.mos_std << '\n';
  }
  if (!out) throw InputError("failed writing manifest " + path.string());
}

Manifest convert_tid(const fs::path& root) {
  const auto mos_path = root / "mos_with_names.txt";
  const auto std_path = root / "mos_std.txt";
  if (!fs::exists(mos_path)) throw InputError("TID layout: missing " + mos_path.string());
  if (!fs::exists(std_path)) throw InputError("TID layout: missing " + std_path.string());
  std::istringstream mos_in(read_text(mos_path));
  std::istringstream std_in(read_text(std_path));
  Manifest m;
  m.name = root.filename().string();
  if (m.name.empty()) m.name = root.parent_path().filename().string();
  std::string line;
  int line_no = 0;
  std::set<std::string> seen;
  while (std::getline(mos_in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    std::istringstream ls(t);
    std::string mos_tok, name;
    ls >> mos_tok >> name;
    IqaRecord r;
    r.row = line_no;
    if (!parse_number(mos_tok, r.mos) || name.size() < 3) {
      throw ParseError(mos_path.string() + ": line " + std::to_string(line_no) + ": malformed entry");
    }
    std::string std_line;
    do {
      if (!std::getline(std_in, std_line)) {
        throw ParseError(std_path.string() + ": fewer entries than " + mos_path.string());
      }
    } while (trim(std_line).empty());
    if (!parse_number(trim(std_line), r.mos_std) || r.mos_std < 0.0) {
      throw ParseError(std_path.string() + ": entry for " + name + " is not a valid std");
    }
    // Distorted "i01_05_3.bmp" comes from reference "I01.BMP".
    const auto ref_name = "I" + name.substr(1, 2) + ".BMP";
    r.ref = find_ci(root / "reference_images", ref_name);
    r.dist = find_ci(root / "distorted_images", name);
    if (!seen.insert(name).second) {
      throw ParseError(mos_path.string() + ": line " + std::to_string(line_no) + ": duplicate " + name);
    }
    m.records.push_back(std::move(r));
  }
  if (m.records.empty()) throw ParseError(mos_path.string() + ": no entries");
  return m;
}

Manifest convert_kadid(const fs::path& root) {
  const auto csv_path = root / "dmos.csv";
  if (!fs::exists(csv_path)) throw InputError("KADID layout: missing " + csv_path.string());
  std::istringstream in(read_text(csv_path));
  std::string line;
  int line_no = 0;
  std::map<std::string, int> col;
  Manifest m;
  m.name = "KADID-10k";
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto f = split_csv(t);
    if (col.empty()) {
      for (std::size_t k = 0; k < f.size(); ++k) col[f[k]] = static_cast<int>(k);
      for (const char* req : {"dist_img", "ref_img", "dmos", "var"}) {
        if (!col.count(req)) {
          throw ParseError(csv_path.string() + ": missing column '" + std::string(req) + "'");
        }
      }
      continue;
    }
    const auto where = csv_path.string() + ": row " + std::to_string(line_no);
    auto get = [&](const char* key) -> std::string {
      const int k = col[key];
      if (k >= static_cast<int>(f.size())) throw ParseError(where + ": missing '" + key + "'");
      return f[k];
    };
    IqaRecord r;
    r.row = line_no;
    double var = 0.0;
    if (!parse_number(get("dmos"), r.mos)) throw ParseError(where + ": bad dmos");
    if (!parse_number(get("var"), var) || var < 0.0) throw ParseError(where + ": bad var");
    r.mos_std = std::sqrt(var);
    r.ref = root / "images" / get("ref_img");
    r.dist = root / "images" / get("dist_img");
    m.records.push_back(std::move(r));
  }
  if (m.records.empty()) throw ParseError(csv_path.string() + ": no entries");
  return m;
}

}  // namespace ppnet
