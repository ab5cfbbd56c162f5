#include "fprune/config_file.hpp"

#include <sstream>

#include "fprune/errors.hpp"
#include "fprune/io_util.hpp"

namespace fprune {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

// Strips a trailing comment that is not inside quotes.
std::string strip_comment(const std::string& line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#' || c == ';') {
      return line.substr(0, i);
    }
  }
  return line;
}

std::string flatten_value(const std::string& raw, std::size_t line_no) {
  if (raw.empty() || raw.front() != '[') return unquote(raw);
  if (raw.back() != ']') {
    throw ConfigError("config line " + std::to_string(line_no) + ": unterminated array");
  }
  std::string out;
  std::stringstream items(raw.substr(1, raw.size() - 2));
  std::string item;
  while (std::getline(items, item, ',')) {
    item = unquote(trim(item));
    if (item.empty()) continue;
    if (!out.empty()) out += ',';
    out += item;
  }
  return out;
}

}  // namespace

ConfigEntries parse_config_text(std::string_view text) {
  ConfigEntries entries;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config line " + std::to_string(line_no) + ": bad section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    entries.emplace_back(section.empty() ? key : section + "." + key,
                         flatten_value(trim(line.substr(eq + 1)), line_no));
  }
  return entries;
}

ConfigEntries read_config_file(const std::filesystem::path& path) {
  return parse_config_text(read_text_file(path));
}

}  // namespace fprune
