#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include "neurashed/errors.hpp"

namespace neurashed {

// Shortest decimal representation that round-trips the exact double.
inline std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
    double x = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        fail(ErrorCode::MalformedDocument, "not a number: \"" + s + "\"");
    return x;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row) {
        if (row.size() != header.size())
            fail(ErrorCode::InvalidConfig, "row width does not match header");
        rows.push_back(std::move(row));
    }
};

namespace detail {

inline std::string csv_escape(const std::string& cell) {
    bool needs_quotes = cell.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs_quotes) return cell;
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

} // namespace detail

inline std::string render_csv(const Table& table) {
    std::string out;
    auto put_row = [&](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += detail::csv_escape(row[i]);
        }
        out += '\n';
    };
    put_row(table.header);
    for (const auto& row : table.rows) put_row(row);
    return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorCode::IoError, "failed writing " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return content;
}

// RFC-4180-style CSV, LF line endings, UTF-8 passthrough.
inline void emit_csv(const Table& table, const std::filesystem::path& path) {
    write_file(path, render_csv(table));
}

} // namespace neurashed
