#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

namespace miq {

// Fixed 6 decimal places; the precision every human-readable report uses.
inline std::string fixed6(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", x);
    return buf;
}

// 6 significant digits; used for p-values, which can be far below 1e-6.
inline std::string sig6(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", x);
    return buf;
}

// Shortest text that round-trips a double exactly.
inline std::string full17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

// Reports round every number to 6 decimals before emitting it, in JSON and
// markdown alike, so both encodings carry the identical value.
inline double round6(double x) { return std::strtod(fixed6(x).c_str(), nullptr); }

inline double round_sig6(double x) { return std::strtod(sig6(x).c_str(), nullptr); }

// Pipe-delimited markdown table.
inline std::string markdown_table(const std::vector<std::string>& header,
                                  const std::vector<std::vector<std::string>>& rows) {
    std::string out = "|";
    for (const auto& h : header) out += " " + h + " |";
    out += "\n|";
    for (std::size_t i = 0; i < header.size(); ++i) out += " --- |";
    out += "\n";
    for (const auto& row : rows) {
        out += "|";
        for (const auto& cell : row) out += " " + cell + " |";
        out += "\n";
    }
    return out;
}

}  // namespace miq
