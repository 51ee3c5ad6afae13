#include "hjbport/csv_io.hpp"

#include "hjbport/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hjbport::csv {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<Row> parse(std::string_view text, std::string_view source) {
    std::vector<Row> rows;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string line = trim(text.substr(pos, end - pos));
        ++line_no;
        pos = end + 1;
        // UTF-8 byte order mark on the first line.
        std::string_view body = line;
        if (line_no == 1 && body.substr(0, 3) == "\xEF\xBB\xBF") body.remove_prefix(3);
        if (body.empty() || body.front() == '#') {
            if (end == text.size()) break;
            continue;
        }
        Row row;
        row.line = line_no;
        std::size_t start = 0;
        while (true) {
            const auto comma = body.find(',', start);
            row.cells.push_back(trim(body.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        rows.push_back(std::move(row));
        if (end == text.size()) break;
    }
    (void)source;
    return rows;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<Row> read(const std::filesystem::path& path) {
    return parse(read_file(path), path.string());
}

std::optional<double> to_double(std::string_view cell) {
    if (cell.empty()) return std::nullopt;
    if (cell.front() == '+') cell.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size()) return std::nullopt;
    return v;
}

double require_double(std::string_view cell, std::string_view source, std::size_t line) {
    const auto v = to_double(cell);
    if (!v) {
        throw IoError(std::string(source) + ":" + std::to_string(line) + ": non-numeric cell '" +
                      std::string(cell) + "'");
    }
    return *v;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + path.string());
        out << content;
        if (!out) throw IoError("write failed for " + path.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp + " to " + path.string() + ": " + ec.message());
}

}  // namespace hjbport::csv
