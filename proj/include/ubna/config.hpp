#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ubna {

/// Minimal key-value config file: '#' comments, [section] headers,
/// 'key = value' lines. Order-preserving so an echoed file is deterministic.
class KeyValueConfig {
public:
  struct Section {
    std::string name;  // "" for the preamble before any header
    std::vector<std::pair<std::string, std::string>> entries;
  };

  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_text(const std::string& text);

  bool has_section(const std::string& section) const;
  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const;

  /// Last-writer-wins set; creates the section if needed.
  void set(const std::string& section, const std::string& key, const std::string& value);

  std::string serialize() const;
  void write_file(const std::string& path) const;

  const std::vector<Section>& sections() const { return sections_; }

private:
  std::vector<Section> sections_;
};

}  // namespace ubna
