// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "ruirl/types.hpp"

namespace ruirl::csv {

/// Line-oriented reader for the comma-delimited, header-row files used by
/// every persisted artifact. No quoting: all fields are numeric or empty.
class Reader {
 public:
  Reader(const std::string& path, std::string_view expected_header)
      : path_(path), in_(path) {
    if (!in_) throw IOError("cannot open " + path);
    std::string header;
    if (!std::getline(in_, header)) throw MalformedRecord(path + ": empty file");
    strip_cr(header);
    if (header != expected_header)
      throw MalformedRecord(path + ":1: expected header '" +
                            std::string(expected_header) + "', got '" + header + "'");
    line_no_ = 1;
  }

  /// Reads the next row into `fields`. Returns false at end of file.
  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      strip_cr(line);
      if (line.empty()) continue;
      fields.clear();
      std::size_t start = 0;
      while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
          fields.push_back(line.substr(start));
          break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
      }
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw MalformedRecord(path_ + ":" + std::to_string(line_no_) + ": " + what);
  }

  void require_fields(const std::vector<std::string>& fields, std::size_t n) const {
    if (fields.size() != n)
      fail("expected " + std::to_string(n) + " fields, got " +
           std::to_string(fields.size()));
  }

  double to_double(const std::string& s) const {
    double value = 0;
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc() || ptr != end) fail("not a number: '" + s + "'");
    return value;
  }

  std::int64_t to_int(const std::string& s) const {
    std::int64_t value = 0;
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc() || ptr != end) fail("not an integer: '" + s + "'");
    return value;
  }

  long line_no() const { return line_no_; }

 private:
  static void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  }

  std::string path_;
  std::ifstream in_;
  long line_no_ = 0;
};

class Writer {
 public:
  Writer(const std::string& path, std::string_view header) : out_(path) {
    if (!out_) throw IOError("cannot open " + path + " for writing");
    out_ << header << '\n';
  }

  Writer& field(std::string_view s) {
    sep();
    out_ << s;
    return *this;
  }

  Writer& field(std::int64_t v) {
    sep();
    out_ << v;
    return *this;
  }

  Writer& field(double v) {
    sep();
    out_ << format_double(v);
    return *this;
  }

  void end_row() {
    out_ << '\n';
    first_ = true;
  }

  /// Shortest text that round-trips the exact double; "-inf"/"inf" literals
  /// for infinities.
  static std::string format_double(double v) {
    if (v == kInfinity) return "inf";
    if (v == -kInfinity) return "-inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
  }

 private:
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }

  std::ofstream out_;
  bool first_ = true;
};

inline double parse_value_or_inf(const Reader& r, const std::string& s) {
  if (s == "-inf") return -kInfinity;
  if (s == "inf") return kInfinity;
  return r.to_double(s);
}

}  // namespace ruirl::csv
