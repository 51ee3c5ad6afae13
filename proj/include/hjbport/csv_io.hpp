#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hjbport::csv {

/// One parsed data row with its 1-based line number in the source file.
struct Row {
    std::size_t line = 0;
    std::vector<std::string> cells;
};

/// Reads a comma-delimited file. Blank lines and lines whose first
/// non-space character is '#' are skipped; cells are whitespace-trimmed.
std::vector<Row> read(const std::filesystem::path& path);

/// Same as read() over in-memory text. `source` names the origin in errors.
std::vector<Row> parse(std::string_view text, std::string_view source);

std::optional<double> to_double(std::string_view cell);

/// Parses a cell or throws IoError naming the source and line.
double require_double(std::string_view cell, std::string_view source, std::size_t line);

/// Round-trip exact text form of a double ("%.17g").
std::string fmt(double v);

std::string trim(std::string_view s);

/// Writes text atomically enough for our purposes (temp file + rename).
void write_file(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

}  // namespace hjbport::csv
