#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pacvd/frontend.hpp"

namespace testfx {

inline std::string fixture_path(const std::string& rel) { return std::string(PACVD_FIXTURE_DIR) + "/" + rel; }

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::vector<pacvd::SourceUnit> listing1_units() {
    std::vector<pacvd::SourceUnit> units;
    for (const char* f : {"sg.c", "blk-core.c", "mempool.c"}) {
        const std::string p = fixture_path(std::string("listing1/") + f);
        units.push_back(pacvd::parse_unit(p, read_file(p)));
    }
    return units;
}

/// Normalizes rendered text for golden comparison: typographic arrows and inequality become
/// their ASCII spelling, whitespace runs collapse, and spacing around those operators is dropped.
inline std::string normalize(std::string s) {
    auto replace_all = [&](const std::string& from, const std::string& to) {
        for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
            s.replace(pos, from.size(), to);
    };
    replace_all("\xE2\x86\x92", "->");
    replace_all("\xE2\x89\xA0", "!=");
    std::string out;
    bool space = false;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            space = true;
            continue;
        }
        if (space && !out.empty()) out += ' ';
        space = false;
        out += c;
    }
    s = out;
    replace_all(" ->", "->");
    replace_all("-> ", "->");
    replace_all(" !=", "!=");
    replace_all("!= ", "!=");
    return s;
}

}  // namespace testfx
