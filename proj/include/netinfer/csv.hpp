#pragma once

// Minimal CSV plumbing used by the loaders and artifact writers. Values are
// comma separated with no quoting (labels with commas are not supported by
// the file formats this library defines). Numeric parsing is strict: empty
// fields, trailing garbage, NaN and infinities are all rejected.

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace netinfer {

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct validation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open file: " + path);
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (first) {
      t.header = fields;
      first = false;
    } else {
      t.rows.push_back(fields);
    }
  }
  if (first) throw validation_error("empty file: " + path);
  return t;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open file: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

inline double parse_real(const std::string& token, const std::string& context) {
  const std::string t = trim(token);
  if (t.empty()) throw validation_error("empty numeric field in " + context);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size())
    throw validation_error("malformed number '" + t + "' in " + context);
  if (!std::isfinite(v))
    throw validation_error("non-finite value '" + t + "' rejected in " + context);
  return v;
}

inline long parse_long(const std::string& token, const std::string& context) {
  const std::string t = trim(token);
  if (t.empty()) throw validation_error("empty integer field in " + context);
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size() || errno == ERANGE)
    throw validation_error("malformed integer '" + t + "' in " + context);
  return v;
}

// Shortest representation that round-trips a double, '.' decimal separator.
inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // prefer a shorter form when it round-trips
  for (int prec = 1; prec < 17; ++prec) {
    char probe[64];
    std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
    if (std::strtod(probe, nullptr) == v) return probe;
  }
  return buf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);  // LF line endings on all platforms
  if (!out) throw io_error("cannot write file: " + path);
  out << content;
  if (!out) throw io_error("write failed: " + path);
}

}  // namespace netinfer
