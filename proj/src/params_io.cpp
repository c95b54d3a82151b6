// Parameter file reader/writer.
//
//   ppnet-params 1
//   config sampling_frequency=192 dog_support=101 ...
//
//   [layer4.K]
//   unit = 1
//   count = 9
//   values = 1.1 5 5 ...
//   frozen = 0 0 0 ...
//
// Numbers use the shortest round-trip representation, so save/load is
// bit-exact.

#include <cmath>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ppnet/errors.hpp"
#include "ppnet/model.hpp"

namespace ppnet {
namespace {

constexpr const char* kMagic = "ppnet-params";
constexpr int kVersion = 1;

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

class Parser {
 public:
  Parser(const std::string& text, std::string origin) : in_(text), origin_(std::move(origin)) {}

  ModelState parse();

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    std::ostringstream os;
    os << origin_ << ":" << line_no_ << ": ";
    if (!section_.empty()) os << "in group " << section_ << ": ";
    os << msg;
    throw ParseError(os.str());
  }

  double to_double(const std::string& tok) const {
    double v = 0.0;
    const char* end = tok.data() + tok.size();
    auto r = std::from_chars(tok.data(), end, v);
    if (r.ec != std::errc() || r.ptr != end || !std::isfinite(v)) {
      fail("malformed number '" + tok + "'");
    }
    return v;
  }

  long to_int(const std::string& tok) const {
    long v = 0;
    const char* end = tok.data() + tok.size();
    auto r = std::from_chars(tok.data(), end, v);
    if (r.ec != std::errc() || r.ptr != end) fail("malformed integer '" + tok + "'");
    return v;
  }

  bool next_line(std::string& out) {
    std::string raw;
    while (std::getline(in_, raw)) {
      ++line_no_;
      const auto hash = raw.find('#');
      if (hash != std::string::npos) raw.erase(hash);
      out = trim(raw);
      if (!out.empty()) return true;
    }
    return false;
  }

  struct Section {
    std::string unit;
    long count = -1;
    std::vector<double> values;
    std::vector<std::uint8_t> frozen;
    bool has_values = false;
    bool has_frozen = false;
    int line = 0;
  };

  std::istringstream in_;
  std::string origin_;
  int line_no_ = 0;
  std::string section_;
};

ModelState Parser::parse() {
  std::string line;
  if (!next_line(line)) fail("empty parameter file");
  {
    std::istringstream hs(line);
    std::string magic;
    int version = 0;
    if (!(hs >> magic) || magic != kMagic) fail("not a parameter file (missing '" + std::string(kMagic) + "' header)");
    if (!(hs >> version)) fail("header lacks a format version");
    if (version != kVersion) {
      fail("unsupported format version " + std::to_string(version) + " (expected " +
           std::to_string(kVersion) + ")");
    }
  }
  ModelConfig cfg;
  bool have_config = false;
  std::map<std::string, Section> sections;
  std::vector<std::string> order;
  Section* cur = nullptr;
  while (next_line(line)) {
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated group header");
      section_ = trim(line.substr(1, line.size() - 2));
      if (section_.empty()) fail("empty group name");
      if (sections.count(section_)) fail("group appears twice");
      cur = &sections[section_];
      cur->line = line_no_;
      order.push_back(section_);
      continue;
    }
    if (!cur) {
      std::istringstream ls(line);
      std::string word;
      ls >> word;
      if (word != "config") fail("expected 'config' or a group header, got '" + word + "'");
      std::string kv;
      while (ls >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) fail("config entry '" + kv + "' is not key=value");
        const auto key = kv.substr(0, eq);
        const auto val = kv.substr(eq + 1);
        if (key == "sampling_frequency") cfg.sampling_frequency = to_double(val);
        else if (key == "dog_support") cfg.dog_support = static_cast<int>(to_int(val));
        else if (key == "dn5_support") cfg.dn5_support = static_cast<int>(to_int(val));
        else if (key == "gabor_support") cfg.gabor_support = static_cast<int>(to_int(val));
        else if (key == "dn7_support") cfg.dn7_support = static_cast<int>(to_int(val));
        else fail("unknown config key '" + key + "'");
      }
      have_config = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto rest = trim(line.substr(eq + 1));
    std::istringstream vs(rest);
    std::string tok;
    if (key == "unit") {
      cur->unit = rest;
    } else if (key == "count") {
      cur->count = to_int(rest);
      if (cur->count < 0) fail("negative count");
    } else if (key == "values") {
      while (vs >> tok) cur->values.push_back(to_double(tok));
      cur->has_values = true;
    } else if (key == "frozen") {
      while (vs >> tok) {
        if (tok != "0" && tok != "1") fail("frozen flags must be 0 or 1, got '" + tok + "'");
        cur->frozen.push_back(tok == "1" ? 1 : 0);
      }
      cur->has_frozen = true;
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  if (!have_config) {
    section_.clear();
    fail("missing config line");
  }

  ModelState m;
  try {
    m = build_bio_model(cfg);
  } catch (const ConfigError& e) {
    section_.clear();
    fail(std::string("invalid config: ") + e.what());
  }
  std::set<std::string> known;
  for (auto& g : m.groups) {
    const auto name = g.qualified_name();
    known.insert(name);
    auto it = sections.find(name);
    if (it == sections.end()) {
      section_ = name;
      fail("group is missing");
    }
    const auto& s = it->second;
    section_ = name;
    line_no_ = s.line;
    if (!s.has_values) fail("no values");
    if (s.count >= 0 && static_cast<std::size_t>(s.count) != s.values.size()) {
      fail("count " + std::to_string(s.count) + " but " + std::to_string(s.values.size()) + " values");
    }
    if (s.values.size() != g.values.size()) {
      fail("expected " + std::to_string(g.values.size()) + " values, found " +
           std::to_string(s.values.size()));
    }
    if (!s.unit.empty() && s.unit != g.unit) fail("unit '" + s.unit + "' but expected '" + g.unit + "'");
    if (s.has_frozen && s.frozen.size() != g.values.size()) fail("frozen flag count does not match values");
    g.values = s.values;
    if (s.has_frozen) g.frozen = s.frozen;
  }
  for (const auto& name : order) {
    if (!known.count(name)) {
      section_ = name;
      line_no_ = sections[name].line;
      fail("unknown group");
    }
  }
  return m;
}

}  // namespace

std::string params_to_string(const ModelState& m) {
  std::ostringstream os;
  os << kMagic << ' ' << kVersion << '\n';
  os << "# units: deg = degrees of visual angle, cpd = cycles/deg, rad = radians\n";
  os << "config sampling_frequency=" << format_double(m.config.sampling_frequency)
     << " dog_support=" << m.config.dog_support << " dn5_support=" << m.config.dn5_support
     << " gabor_support=" << m.config.gabor_support << " dn7_support=" << m.config.dn7_support
     << '\n';
  for (const auto& g : m.groups) {
    os << "\n[" << g.qualified_name() << "]\n";
    os << "unit = " << g.unit << '\n';
    os << "count = " << g.values.size() << '\n';
    os << "values =";
    for (double v : g.values) os << ' ' << format_double(v);
    os << "\nfrozen =";
    for (auto f : g.frozen) os << ' ' << static_cast<int>(f);
    os << '\n';
  }
  return os.str();
}

ModelState params_from_string(const std::string& text, const std::string& origin) {
  return Parser(text, origin).parse();
}

void save_params(const ModelState& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write parameter file " + path.string());
  out << params_to_string(m);
  if (!out) throw InputError("failed writing parameter file " + path.string());
}

ModelState load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read parameter file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return params_from_string(ss.str(), path.string());
}

}  // namespace ppnet
