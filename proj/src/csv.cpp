#include "floodmax/csv.hpp"

#include <charconv>
#include <cmath>

namespace floodmax::csv {

DataError::DataError(const std::string& src, std::size_t ln, const std::string& message)
    : std::runtime_error(src + (ln > 0 ? ":" + std::to_string(ln) : std::string()) + ": " + message),
      source(src),
      line(ln) {}

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, const std::string& source, std::size_t line, std::string_view column) {
  if (text == "NA") return std::nan("");
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty())
    throw DataError(source, line, "column '" + std::string(column) + "': not a number: '" + std::string(text) + "'");
  return v;
}

long long parse_int(std::string_view text, const std::string& source, std::size_t line, std::string_view column) {
  long long v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty())
    throw DataError(source, line, "column '" + std::string(column) + "': not an integer: '" + std::string(text) + "'");
  return v;
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

Reader::Reader(const std::filesystem::path& path) : in_(path), source_(path.string()) {
  if (!in_) throw DataError(source_, 0, "cannot open file");
}

bool Reader::next(std::vector<std::string>& fields) {
  std::string text;
  while (std::getline(in_, text)) {
    ++line_;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty() || text.front() == '#') continue;
    fields = split(text);
    return true;
  }
  return false;
}

std::vector<std::string> Reader::read_header() {
  std::vector<std::string> header;
  if (!next(header)) throw DataError(source_, line_, "missing header row");
  return header;
}

void Reader::expect_header(const std::vector<std::string>& expected) {
  const auto header = read_header();
  if (header != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw DataError(source_, line_, "unexpected header, expected '" + want + "'");
  }
}

Writer::Writer(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
  if (!out_) throw DataError(path.string(), 0, "cannot open file for writing");
}

void Writer::comment(std::string_view text) { out_ << "# " << text << '\n'; }

void Writer::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << fields[i];
  }
  out_ << '\n';
  if (!out_) throw DataError(path_.string(), 0, "write failed");
}

}  // namespace floodmax::csv
