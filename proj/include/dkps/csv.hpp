// SPDX-License-Identifier: Apache-2.0
//
// Minimal RFC-4180-style CSV reading/writing. Lines starting with '#' are
// treated as comments (our own writers emit a schema comment line).

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dkps {

struct CsvFile {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_lines;  // 1-based source line per row
};

// Parses CSV text; first non-comment line is the header.
CsvFile parse_csv(std::string_view text, const std::string& origin);

// Reads and parses; verifies the header matches `expected` exactly.
CsvFile read_csv_file(const std::filesystem::path& path,
                      const std::vector<std::string>& expected_header);

std::string csv_escape(std::string_view field);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace dkps
