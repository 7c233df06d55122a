#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "calm/errors.hpp"
#include "json.hpp"

namespace calm {

/// Read a line-delimited JSON file. Blank lines are skipped; a malformed
/// line raises ParseError with its 1-based line number.
inline std::vector<nlohmann::json> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);
    std::vector<nlohmann::json> records;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        try {
            records.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return records;
}

/// Write a file atomically: write to a sibling temp file, then rename.
inline void atomic_write_file(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw ConfigError("cannot write file: " + tmp.string());
        out << content;
    }
    fs::rename(tmp, target);
}

}  // namespace calm
