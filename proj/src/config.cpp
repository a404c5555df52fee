#include "ubna/config.hpp"

#include <fstream>
#include <sstream>

#include "ubna/errors.hpp"
#include "ubna/util.hpp"

namespace ubna {

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str());
}

KeyValueConfig KeyValueConfig::parse_text(const std::string& text) {
  KeyValueConfig cfg;
  cfg.sections_.push_back({"", {}});
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw InvalidInput("config line " + std::to_string(lineno) + ": bad section header");
      cfg.sections_.push_back({trim(t.substr(1, t.size() - 2)), {}});
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw InvalidInput("config line " + std::to_string(lineno) + ": expected key = value");
    cfg.sections_.back().entries.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

bool KeyValueConfig::has_section(const std::string& section) const {
  for (const Section& s : sections_)
    if (s.name == section) return true;
  return false;
}

std::optional<std::string> KeyValueConfig::get(const std::string& section,
                                               const std::string& key) const {
  std::optional<std::string> found;
  for (const Section& s : sections_) {
    if (s.name != section) continue;
    for (const auto& [k, v] : s.entries)
      if (k == key) found = v;  // last occurrence wins
  }
  return found;
}

std::string KeyValueConfig::get_or(const std::string& section, const std::string& key,
                                   const std::string& fallback) const {
  auto v = get(section, key);
  return v ? *v : fallback;
}

void KeyValueConfig::set(const std::string& section, const std::string& key,
                         const std::string& value) {
  for (Section& s : sections_) {
    if (s.name != section) continue;
    for (auto& [k, v] : s.entries) {
      if (k == key) {
        v = value;
        return;
      }
    }
    s.entries.emplace_back(key, value);
    return;
  }
  sections_.push_back({section, {{key, value}}});
}

std::string KeyValueConfig::serialize() const {
  std::ostringstream out;
  bool first = true;
  for (const Section& s : sections_) {
    if (s.name.empty() && s.entries.empty()) continue;
    if (!s.name.empty()) {
      if (!first) out << "\n";
      out << "[" << s.name << "]\n";
    }
    for (const auto& [k, v] : s.entries) out << k << " = " << v << "\n";
    first = false;
  }
  return out.str();
}

void KeyValueConfig::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write config file: " + path);
  out << serialize();
}

}  // namespace ubna
