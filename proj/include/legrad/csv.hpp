#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace legrad {

/// Shortest round-trip decimal form, '.' decimal point (C locale assumed).
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Minimal RFC-4180-style writer: header row, comma separated, one record
/// per line. Values never need quoting here (numbers and plain identifiers);
/// missing values are written as empty fields.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path) {
    if (!out_) throw std::runtime_error("csv: cannot write " + path);
  }

  void header(std::span<const std::string> names) { write_record(names); }

  CsvWriter& field(const std::string& value) {
    row_.push_back(value);
    return *this;
  }
  CsvWriter& field(double value) { return field(format_double(value)); }
  CsvWriter& field(long value) { return field(std::to_string(value)); }
  CsvWriter& field(int value) { return field(std::to_string(value)); }
  CsvWriter& field(const std::optional<double>& value) {
    return field(value ? format_double(*value) : std::string());
  }

  void end_row() {
    write_record(row_);
    row_.clear();
  }

 private:
  void write_record(std::span<const std::string> fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i > 0) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
  }

  std::ofstream out_;
  std::vector<std::string> row_;
};

}  // namespace legrad
