// SPDX-License-Identifier: Apache-2.0

#include "dkps/csv.hpp"

#include <fstream>
#include <sstream>

#include "dkps/errors.hpp"

namespace dkps {

namespace {

std::vector<std::string> parse_line(std::string_view line, std::size_t line_no,
                                    const std::string& origin) {
  std::vector<std::string> fields;
  std::string current;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      if (!current.empty())
        throw DatasetError(origin + ":" + std::to_string(line_no) + ": stray quote in field");
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (in_quotes)
    throw DatasetError(origin + ":" + std::to_string(line_no) + ": unterminated quoted field");
  fields.push_back(std::move(current));
  return fields;
}

}  // namespace

CsvFile parse_csv(std::string_view text, const std::string& origin) {
  CsvFile out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    const std::size_t next = end + 1;
    if (!line.empty() && line.front() != '#') {
      auto fields = parse_line(line, line_no, origin);
      if (!have_header) {
        out.header = std::move(fields);
        have_header = true;
      } else {
        out.rows.push_back(std::move(fields));
        out.row_lines.push_back(line_no);
      }
    }
    if (end == text.size()) break;
    pos = next;
  }
  if (!have_header) throw DatasetError(origin + ": empty file (missing header row)");
  return out;
}

CsvFile read_csv_file(const std::filesystem::path& path,
                      const std::vector<std::string>& expected_header) {
  const std::string origin = path.filename().string();
  CsvFile csv = parse_csv(read_text_file(path), origin);
  if (csv.header != expected_header) {
    std::ostringstream want;
    for (std::size_t i = 0; i < expected_header.size(); ++i) {
      if (i) want << ",";
      want << expected_header[i];
    }
    throw DatasetError(origin + ": unexpected header (want '" + want.str() + "')");
  }
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    if (csv.rows[i].size() != expected_header.size())
      throw DatasetError(origin + ":" + std::to_string(csv.row_lines[i]) +
                         ": wrong field count");
  }
  return csv;
}

std::string csv_escape(std::string_view field) {
  const bool needs_quotes =
      field.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace dkps
