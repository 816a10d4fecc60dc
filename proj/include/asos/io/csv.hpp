#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "asos/common.hpp"

namespace asos::io {

// Comma-separated text with a mandatory header row. Quoting is supported on
// read (fields containing commas); writers emit plain fields only.

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }

  int require_column(const std::string& name, const std::string& path) const {
    int c = column(name);
    if (c < 0) throw DataError("csv " + path + " missing column '" + name + "'");
    return c;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(field);
  return out;
}

inline CsvTable load_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open csv file: " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(f, line))
    throw DataError("csv file is empty (header row required): " + path);
  t.header = split_csv_line(line);
  while (std::getline(f, line)) {
    if (line.empty() || line == "\r") continue;
    t.rows.push_back(split_csv_line(line));
  }
  return t;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) {
    write_row(header);
  }

  template <typename... Fields>
  void row(const Fields&... fields) {
    std::vector<std::string> r;
    (r.push_back(to_field(fields)), ...);
    write_row(r);
  }

  void raw_row(const std::vector<std::string>& r) { write_row(r); }

  const std::string& str() const { return buf_; }

 private:
  static std::string to_field(const std::string& s) { return s; }
  static std::string to_field(const char* s) { return s; }
  template <typename T>
  static std::string to_field(const T& v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
  }

  void write_row(const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) buf_.push_back(',');
      buf_ += r[i];
    }
    buf_.push_back('\n');
  }

  std::string buf_;
};

}  // namespace asos::io
