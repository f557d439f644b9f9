#pragma once

// Minimal reader for the plain comma-separated files used by the CLI. No
// quoting: none of our schemas carry commas inside fields.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "geocover/errors.hpp"

namespace geocover::csv {

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    for (auto& f : out) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    }
    return out;
}

inline double parse_double(std::string_view s, std::size_t line, const char* field) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ParseError(std::string("bad number in '") + field + "': '" + std::string(s) + "'", line);
    if (!std::isfinite(v)) throw ParseError(std::string("non-finite '") + field + "'", line);
    return v;
}

inline std::int64_t parse_int(std::string_view s, std::size_t line, const char* field) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ParseError(std::string("bad integer in '") + field + "': '" + std::string(s) + "'", line);
    return v;
}

/// Opens `path`, checks the header matches `expected` exactly and hands every
/// non-empty data row (with its 1-based line number) to `fn`.
template <class Fn>
void for_each_row(const std::string& path, const std::vector<std::string_view>& expected, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::string line;
    std::size_t lineno = 0;
    bool header = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (header) {
            auto cols = split(line);
            if (cols != expected) {
                std::string want;
                for (auto c : expected) want += (want.empty() ? "" : ",") + std::string(c);
                throw ParseError("expected header '" + want + "'", lineno);
            }
            header = false;
            continue;
        }
        if (line.empty() || line == "\r") continue;
        auto fields = split(line);
        if (fields.size() != expected.size())
            throw ParseError("expected " + std::to_string(expected.size()) + " columns, got " +
                                 std::to_string(fields.size()),
                             lineno);
        fn(fields, lineno);
    }
    if (header) throw ParseError("empty file " + path);
}

}  // namespace geocover::csv
