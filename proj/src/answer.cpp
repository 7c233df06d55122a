#include "calm/answer.hpp"

#include <algorithm>
#include <cctype>

#include "calm/errors.hpp"
#include "calm/text.hpp"

namespace calm {
namespace {

// The correction prompts elicit an explanation before the final header;
// everything before the last "Answer:" (which also terminates
// "Final Answer:" and "Corrected Answer:") is preamble.
std::string strip_preamble(const std::string& s) {
    static const std::string kHeader = "Answer:";
    auto pos = s.rfind(kHeader);
    if (pos == std::string::npos) return s;
    return s.substr(pos + kHeader.size());
}

// Extract all [n] markers from a span, in order, and return the text with
// the markers removed.
std::pair<std::string, std::vector<int>> extract_markers(const std::string& span) {
    std::string out;
    std::vector<int> markers;
    size_t i = 0;
    while (i < span.size()) {
        if (span[i] == '[') {
            size_t j = i + 1;
            while (j < span.size() && std::isdigit(static_cast<unsigned char>(span[j]))) ++j;
            if (j > i + 1 && j < span.size() && span[j] == ']') {
                markers.push_back(std::stoi(span.substr(i + 1, j - i - 1)));
                i = j + 1;
                continue;
            }
        }
        out.push_back(span[i]);
        ++i;
    }
    return {out, markers};
}

bool is_terminal(char c) { return c == '.' || c == '?' || c == '!'; }

std::string tidy_statement_text(const std::string& s) {
    std::string t = text::collapse_ws(s);
    // no space before punctuation left behind by marker removal
    std::string out;
    for (char c : t) {
        if (!out.empty() && out.back() == ' ' &&
            (is_terminal(c) || c == ',' || c == ';' || c == ':')) {
            out.back() = c;
        } else {
            out.push_back(c);
        }
    }
    return out;
}

// Deduplicate, keep first-occurrence order, drop indices outside valid_ids.
std::vector<int> filter_citations(const std::vector<int>& markers,
                                  const std::optional<std::set<int>>& valid_ids,
                                  bool& dropped) {
    std::vector<int> out;
    for (int m : markers) {
        if (valid_ids && !valid_ids->count(m)) {
            dropped = true;
            continue;
        }
        if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    return out;
}

// Split into sentence spans at . ? ! followed by whitespace or end.
std::vector<std::string> split_sentences(const std::string& s) {
    std::vector<std::string> spans;
    std::string cur;
    for (size_t i = 0; i < s.size(); ++i) {
        cur.push_back(s[i]);
        if (is_terminal(s[i]) &&
            (i + 1 == s.size() || std::isspace(static_cast<unsigned char>(s[i + 1])))) {
            spans.push_back(cur);
            cur.clear();
        }
    }
    if (cur.find_first_not_of(" \t\r\n") != std::string::npos) spans.push_back(cur);
    return spans;
}

// Markers at the very start of a span belong to the preceding sentence.
std::vector<int> take_leading_markers(std::string& span) {
    std::vector<int> markers;
    size_t i = 0;
    while (true) {
        size_t start = i;
        while (i < span.size() && std::isspace(static_cast<unsigned char>(span[i]))) ++i;
        if (i < span.size() && span[i] == '[') {
            size_t j = i + 1;
            while (j < span.size() && std::isdigit(static_cast<unsigned char>(span[j]))) ++j;
            if (j > i + 1 && j < span.size() && span[j] == ']') {
                markers.push_back(std::stoi(span.substr(i + 1, j - i - 1)));
                i = j + 1;
                continue;
            }
        }
        i = start;
        break;
    }
    span.erase(0, i);
    return markers;
}

}  // namespace

GroundedAnswer parse_long_form(const std::string& input,
                               const std::optional<std::set<int>>& valid_ids) {
    GroundedAnswer answer;
    answer.style = AnswerStyle::long_form;
    answer.raw_text = input;

    auto spans = split_sentences(strip_preamble(input));
    std::vector<std::pair<std::string, std::vector<int>>> pending;  // raw text + markers
    for (auto span : spans) {
        auto leading = take_leading_markers(span);
        if (!pending.empty()) {
            auto& prev = pending.back().second;
            prev.insert(prev.end(), leading.begin(), leading.end());
            leading.clear();
        }
        auto [body, markers] = extract_markers(span);
        leading.insert(leading.end(), markers.begin(), markers.end());
        pending.emplace_back(std::move(body), std::move(leading));
    }

    for (auto& [body, markers] : pending) {
        Statement st;
        st.text = tidy_statement_text(body);
        if (st.text.empty()) {
            // a span that was all markers: credit them to the previous statement
            if (!answer.statements.empty() && !markers.empty()) {
                bool dropped = false;
                auto extra = filter_citations(markers, valid_ids, dropped);
                answer.dropped_out_of_range |= dropped;
                auto& prev = answer.statements.back().citations;
                for (int m : extra) {
                    if (std::find(prev.begin(), prev.end(), m) == prev.end()) prev.push_back(m);
                }
            }
            continue;
        }
        if (!is_terminal(st.text.back())) st.text.push_back('.');
        bool dropped = false;
        st.citations = filter_citations(markers, valid_ids, dropped);
        answer.dropped_out_of_range |= dropped;
        answer.statements.push_back(std::move(st));
    }
    return answer;
}

GroundedAnswer parse_entity_list(const std::string& input,
                                 const std::optional<std::set<int>>& valid_ids) {
    GroundedAnswer answer;
    answer.style = AnswerStyle::entity_list;
    answer.raw_text = input;

    std::string body = strip_preamble(input);
    std::vector<std::string> items;
    std::string cur;
    for (char c : body) {
        if (c == ',') {
            items.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    items.push_back(cur);

    for (const auto& item : items) {
        auto [raw, markers] = extract_markers(item);
        std::string entity = text::collapse_ws(raw);
        while (!entity.empty() && (entity.back() == '.' || entity.back() == ' ')) {
            entity.pop_back();
        }
        if (entity.empty()) continue;
        Statement st;
        st.text = entity;
        bool dropped = false;
        st.citations = filter_citations(markers, valid_ids, dropped);
        answer.dropped_out_of_range |= dropped;
        answer.statements.push_back(std::move(st));
    }
    return answer;
}

GroundedAnswer parse_answer(AnswerStyle style, const std::string& input,
                            const std::optional<std::set<int>>& valid_ids) {
    return style == AnswerStyle::entity_list ? parse_entity_list(input, valid_ids)
                                             : parse_long_form(input, valid_ids);
}

EvidenceSet evidence_set(const GroundedAnswer& answer,
                         const std::map<int, std::string>& display_map) {
    EvidenceSet ev;
    std::set<std::string> seen;
    for (const auto& st : answer.statements) {
        for (int c : st.citations) {
            auto it = display_map.find(c);
            if (it == display_map.end()) {
                throw IntegrityError("citation index " + std::to_string(c) +
                                     " missing from display map");
            }
            ev.display_index_map[c] = it->second;
            if (seen.insert(it->second).second) ev.pids.push_back(it->second);
        }
    }
    return ev;
}

std::string render(const GroundedAnswer& answer) {
    auto markers_of = [](const Statement& st) {
        std::string m;
        for (int c : st.citations) m += "[" + std::to_string(c) + "]";
        return m;
    };

    std::string out;
    if (answer.style == AnswerStyle::entity_list) {
        for (const auto& st : answer.statements) {
            if (!out.empty()) out += ", ";
            out += st.text;
            if (!st.citations.empty()) out += " " + markers_of(st);
        }
        return out;
    }
    for (const auto& st : answer.statements) {
        if (!out.empty()) out += " ";
        if (st.citations.empty()) {
            out += st.text;
        } else if (!st.text.empty() && is_terminal(st.text.back())) {
            out += st.text.substr(0, st.text.size() - 1) + " " + markers_of(st) + st.text.back();
        } else {
            out += st.text + " " + markers_of(st);
        }
    }
    return out;
}

nlohmann::json answer_to_json(const GroundedAnswer& answer) {
    nlohmann::json statements = nlohmann::json::array();
    for (const auto& st : answer.statements) {
        statements.push_back({{"text", st.text}, {"citations", st.citations}});
    }
    return {{"style", answer.style == AnswerStyle::entity_list ? "entity_list" : "long_form"},
            {"raw_text", answer.raw_text},
            {"dropped_out_of_range", answer.dropped_out_of_range},
            {"statements", std::move(statements)}};
}

GroundedAnswer answer_from_json(const nlohmann::json& j) {
    GroundedAnswer a;
    a.style = j.at("style").get<std::string>() == "entity_list" ? AnswerStyle::entity_list
                                                                : AnswerStyle::long_form;
    a.raw_text = j.value("raw_text", std::string{});
    a.dropped_out_of_range = j.value("dropped_out_of_range", false);
    for (const auto& s : j.at("statements")) {
        a.statements.push_back(
            {s.at("text").get<std::string>(), s.at("citations").get<std::vector<int>>()});
    }
    return a;
}

}  // namespace calm
