#pragma once

// Line-oriented parsing shared by the plain-text model, limit and table files.

#include <charconv>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ergo/types.hpp"

namespace ergo::detail {

struct TextLine {
  std::size_t number = 0;  // 1-based
  std::string_view key;    // set for "key = value" lines
  std::string_view value;
  std::vector<std::string_view> fields;  // set for row lines
  bool is_pair() const { return !key.empty(); }
};

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t b = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(b, i - b));
      b = i + 1;
    }
  }
  return out;
}

/// Splits a document into non-empty lines with '#' comments removed.
inline std::vector<TextLine> parse_lines(std::string_view text) {
  std::vector<TextLine> lines;
  std::size_t number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(pos, end - pos);
    ++number;
    pos = end + 1;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    raw = trim(raw);
    if (raw.empty()) {
      if (end == text.size()) break;
      continue;
    }
    TextLine line;
    line.number = number;
    if (const auto eq = raw.find('='); eq != std::string_view::npos) {
      line.key = trim(raw.substr(0, eq));
      line.value = trim(raw.substr(eq + 1));
    } else {
      line.fields = split_ws(raw);
    }
    lines.push_back(line);
    if (end == text.size()) break;
  }
  return lines;
}

inline double parse_double(std::string_view s, std::size_t line, std::string_view what) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ValidationError("line " + std::to_string(line) + ": cannot parse " + std::string(what) +
                          " from '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace ergo::detail
