#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rainsr {

// One "key = value" line of an INI-like text file.
struct KeyValueLine {
  std::string section;  // empty before the first [header]
  std::string key;
  std::string value;
  int line = 0;
};

struct KeyValueDocument {
  std::vector<KeyValueLine> lines;
};

// Parses "key = value" lines with optional [section] headers. '#' and ';'
// start comments at the beginning of a line. Malformed lines throw ConfigError.
KeyValueDocument parse_key_value(const std::string& text, const std::string& source);

std::string trim(const std::string& s);

// Typed value parsers; failures throw ConfigError naming the key and line.
int parse_int(const std::string& v, const std::string& key, int line);
std::uint64_t parse_u64(const std::string& v, const std::string& key, int line);
double parse_double(const std::string& v, const std::string& key, int line);
bool parse_bool(const std::string& v, const std::string& key, int line);

// Shortest text that parses back to exactly the same double.
std::string format_double(double v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h = 0xCBF29CE484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace rainsr
