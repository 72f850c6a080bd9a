#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cxai/common.hpp"

namespace cxai::csv {

using Row = std::vector<std::string>;

/// Reads one RFC-4180 record. Quoted fields may contain separators, doubled
/// quotes and line breaks. Returns false at end of input.
inline bool read_record(std::istream& in, Row& out, char sep = ',') {
  out.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
    } else if (c == sep) {
      out.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get(c);
      break;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw Error(ErrorCode::InvalidArgument, "unterminated quoted field");
  if (any) out.push_back(std::move(field));
  return any;
}

inline std::vector<Row> read_all(std::istream& in, char sep = ',') {
  std::vector<Row> rows;
  Row r;
  while (read_record(in, r, sep)) {
    if (r.size() == 1 && r[0].empty()) continue;  // blank line
    rows.push_back(r);
  }
  return rows;
}

inline std::string escape(const std::string& field, char sep = ',') {
  if (field.find_first_of(std::string{sep, '"', '\n', '\r'}) == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline void write_record(std::ostream& out, const Row& row, char sep = ',') {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << sep;
    out << escape(row[i], sep);
  }
  out << '\n';
}

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  return out;
}

}  // namespace cxai::csv
