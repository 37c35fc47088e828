#pragma once

// Small text helpers shared by the file formats.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace swinemap {

/// Shortest decimal text that parses back to exactly `v`.
std::string format_number(double v);
double parse_number(std::string_view s);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws FormatError when absent.
  std::size_t column(std::string_view name) const;
};

/// Minimal CSV: comma separated, optional double quotes, first line is the header.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);
std::string csv_escape(std::string_view field);

std::string read_text(const std::filesystem::path& path);

/// Writes via a temporary sibling and renames into place.
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace swinemap
