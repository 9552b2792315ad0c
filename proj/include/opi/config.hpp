#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <string>
#include <utility>
#include <vector>

#include "opi/engine.hpp"
#include "opi/series.hpp"

namespace opi {

/// Flat "section.key = value" lines; '#' starts a comment. Later lines win.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

KeyValues parse_key_values(std::istream& in);
KeyValues parse_key_values(const std::string& text);

/// Named accessors onto the fields of a live config struct.
class FieldSet {
 public:
  struct Field {
    std::string key;
    std::function<std::string()> get;
    std::function<void(const std::string&)> set;
  };

  void add(Field f) { fields_.push_back(std::move(f)); }
  void append(const FieldSet& other);

  /// Applies every pair; unknown keys and malformed values throw DomainError naming the key.
  void apply(const KeyValues& values) const;
  bool knows(const std::string& key) const;

  /// Canonical "key = value" lines in registration order.
  std::string render() const;
  KeyValues snapshot() const;

 private:
  std::vector<Field> fields_;
};

FieldSet engine_fields(EngineConfig& cfg);
FieldSet series_fields(SeriesSpec& spec);

// Value codecs shared by field sets.
double parse_real(const std::string& key, const std::string& text);
std::uint64_t parse_count(const std::string& key, const std::string& text);
std::vector<std::size_t> parse_count_list(const std::string& key, const std::string& text);
std::string render_count_list(const std::vector<std::size_t>& values);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

}  // namespace opi
