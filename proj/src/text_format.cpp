#include "rainsr/text_format.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rainsr/error.hpp"

namespace rainsr {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

KeyValueDocument parse_key_value(const std::string& text, const std::string& source) {
  KeyValueDocument doc;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError(source + ":" + std::to_string(line_no) + ": malformed section header '" + line + "'");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'key = value', got '" + line + "'");
    }
    KeyValueLine kv{section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
    if (kv.key.empty()) throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
    doc.lines.push_back(std::move(kv));
  }
  return doc;
}

namespace {

[[noreturn]] void bad_value(const std::string& v, const std::string& key, int line, const char* type) {
  throw ConfigError("line " + std::to_string(line) + ": key '" + key + "' expects " + type + ", got '" + v + "'");
}

}  // namespace

int parse_int(const std::string& v, const std::string& key, int line) {
  int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) bad_value(v, key, line, "an integer");
  return out;
}

std::uint64_t parse_u64(const std::string& v, const std::string& key, int line) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) bad_value(v, key, line, "an unsigned integer");
  return out;
}

double parse_double(const std::string& v, const std::string& key, int line) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) bad_value(v, key, line, "a number");
  return out;
}

bool parse_bool(const std::string& v, const std::string& key, int line) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(v, key, line, "a boolean");
}

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ec == std::errc() ? p : buf);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace rainsr
