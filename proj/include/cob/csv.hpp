#pragma once

#include "cob/date.hpp"
#include "cob/error.hpp"

#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cob::csv {

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_number(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw error("cannot format number");
    return std::string(buf, p);
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Splits into lines, dropping blank lines and '#' comment lines. Pairs are (1-based line number, text).
inline std::vector<std::pair<std::size_t, std::string_view>> lines(std::string_view text) {
    std::vector<std::pair<std::size_t, std::string_view>> out;
    std::size_t lineno = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto pos = text.find('\n', start);
        auto line = text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        ++lineno;
        auto t = trim(line);
        if (!t.empty() && t.front() != '#') out.emplace_back(lineno, t);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

struct DatedValue {
    Date date;
    std::optional<double> value;
};

/// Reads a header + (date, value) body. `missing_marker` cells become nullopt.
inline std::vector<DatedValue> read_dated_values(std::string_view text, std::string_view missing_marker) {
    auto rows = lines(text);
    if (rows.empty()) throw validation_error("empty CSV: no header row");
    std::vector<DatedValue> out;
    out.reserve(rows.size() - 1);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        auto [lineno, line] = rows[i];
        auto cells = split(line);
        if (cells.size() < 2) throw parse_error("expected date and value columns", lineno);
        Date d;
        try {
            d = Date::parse(cells[0]);
        } catch (const std::invalid_argument& e) {
            throw parse_error(e.what(), lineno);
        }
        if (cells[1] == missing_marker || cells[1].empty()) {
            out.push_back({d, std::nullopt});
            continue;
        }
        auto v = parse_number(cells[1]);
        if (!v) throw parse_error("malformed value '" + std::string(cells[1]) + "'", lineno);
        out.push_back({d, *v});
    }
    return out;
}

}  // namespace cob::csv
