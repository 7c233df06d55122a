#include "calm/text.hpp"

#include <cctype>

namespace calm::text {

static bool is_alnum(unsigned char c) { return std::isalnum(c) != 0; }

std::string to_lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::vector<std::string> tokenize(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : s) {
        if (is_alnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string strip_citation_markers(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        if (s[i] == '[') {
            size_t j = i + 1;
            while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
            if (j > i + 1 && j < s.size() && s[j] == ']') {
                i = j + 1;
                continue;
            }
        }
        out.push_back(s[i]);
        ++i;
    }
    return out;
}

std::string collapse_ws(const std::string& s) {
    std::string out;
    bool in_ws = true;  // trims leading whitespace
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            in_ws = true;
        } else {
            if (in_ws && !out.empty()) out.push_back(' ');
            out.push_back(static_cast<char>(c));
            in_ws = false;
        }
    }
    return out;
}

std::string normalize_for_match(const std::string& s) {
    std::string out;
    std::string cur;
    auto flush = [&] {
        // strip punctuation at token edges
        size_t b = 0, e = cur.size();
        while (b < e && !is_alnum(static_cast<unsigned char>(cur[b]))) ++b;
        while (e > b && !is_alnum(static_cast<unsigned char>(cur[e - 1]))) --e;
        if (e > b) {
            if (!out.empty()) out.push_back(' ');
            out.append(cur, b, e - b);
        }
        cur.clear();
    };
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            flush();
        } else {
            cur.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    flush();
    return out;
}

bool contains_normalized(const std::string& haystack, const std::string& needle) {
    return normalize_for_match(haystack).find(normalize_for_match(needle)) != std::string::npos;
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    if (from.empty()) return s;
    size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

}  // namespace calm::text
