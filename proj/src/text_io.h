/*
 * Copyright 2026 The fairconf Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FAIRCONF_SRC_TEXT_IO_H_
#define FAIRCONF_SRC_TEXT_IO_H_

// Small text helpers shared by the file readers and writers.

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace fairconf::internal {

std::string_view Trim(std::string_view s);

std::string ToLower(std::string_view s);

// Splits on commas. Quoting is not supported; none of the formats need it.
std::vector<std::string> SplitCsvLine(std::string_view line);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<size_t> line_numbers;  // 1-based source line of each row
};

// Reads a CSV file and checks that its header equals expected_header. Blank
// lines are skipped; every row must have the header's column count.
CsvTable ReadCsv(const std::filesystem::path& path,
                 const std::vector<std::string>& expected_header);

// Shortest decimal representation that parses back to the same double.
std::string FormatRoundTrip(double value);

// Fixed-point representation with the given number of decimals.
std::string FormatFixed(double value, int decimals);

// Parses a complete decimal number; throws DataError with context on failure.
double ParseDouble(std::string_view text, std::string_view context);
long long ParseInt(std::string_view text, std::string_view context);

std::ifstream OpenForRead(const std::filesystem::path& path);

// Opens a file for binary-mode writing (no newline translation) and creates
// missing parent directories.
std::ofstream OpenForWrite(const std::filesystem::path& path);

// Replaces characters outside [A-Za-z0-9_-] with '_' for use in file names.
std::string SanitizeFileToken(std::string_view s);

}  // namespace fairconf::internal

#endif  // FAIRCONF_SRC_TEXT_IO_H_
