#pragma once

#include "hullgan/errors.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace hullgan::detail {

/// Shortest decimal text that round-trips a double exactly.
inline std::string format_double(double value)
{
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    (void)ec;
    return std::string(buf, end);
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',')
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline double parse_double(std::string_view cell, std::string_view where)
{
    cell = trim(cell);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty())
        throw FormatError(std::string(where) + ": not a number: '" + std::string(cell) + "'");
    return value;
}

inline std::string cell_location(const std::filesystem::path& path, std::size_t row, std::size_t col)
{
    return path.string() + ": row " + std::to_string(row) + ", column " + std::to_string(col + 1);
}

inline std::ifstream open_input(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IOError("cannot open " + path.string() + " for reading");
    return in;
}

inline std::ofstream open_output(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IOError("cannot open " + path.string() + " for writing");
    return out;
}

inline std::string indexed_name(std::string_view prefix, std::size_t index, int width)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%0*zu", width, index);
    return std::string(prefix) + buf;
}

} // namespace hullgan::detail
