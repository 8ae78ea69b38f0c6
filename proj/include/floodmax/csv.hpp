#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace floodmax::csv {

// Input problem tied to a file position. line == 0 means "whole file".
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& source, std::size_t line, const std::string& message);
  std::string source;
  std::size_t line;
};

// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);
double parse_double(std::string_view text, const std::string& source, std::size_t line, std::string_view column);
long long parse_int(std::string_view text, const std::string& source, std::size_t line, std::string_view column);

std::vector<std::string> split(std::string_view line, char sep = ',');

// Line reader that skips '#' comment lines and blank lines, tracks line numbers
// and strips a trailing '\r'.
class Reader {
 public:
  explicit Reader(const std::filesystem::path& path);
  bool next(std::vector<std::string>& fields);
  std::size_t line() const { return line_; }
  const std::string& source() const { return source_; }
  // Reads the header row and requires it to equal `expected` exactly.
  void expect_header(const std::vector<std::string>& expected);
  std::vector<std::string> read_header();

 private:
  std::ifstream in_;
  std::string source_;
  std::size_t line_ = 0;
};

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path);
  void comment(std::string_view text);
  void row(const std::vector<std::string>& fields);
  template <typename... Ts>
  void values(const Ts&... v) {
    row({to_field(v)...});
  }

 private:
  static std::string to_field(const std::string& s) { return s; }
  static std::string to_field(const char* s) { return s; }
  static std::string to_field(double v) { return format_double(v); }
  static std::string to_field(int v) { return std::to_string(v); }
  static std::string to_field(long v) { return std::to_string(v); }
  static std::string to_field(long long v) { return std::to_string(v); }
  static std::string to_field(unsigned long v) { return std::to_string(v); }
  static std::string to_field(unsigned long long v) { return std::to_string(v); }

  std::ofstream out_;
  std::filesystem::path path_;
};

}  // namespace floodmax::csv
