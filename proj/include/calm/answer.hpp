#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

namespace calm {

enum class AnswerStyle { long_form, entity_list };

/// One answer unit: a sentence (long form) or an entity (list form), plus the
/// display indices of the documents it cites. Citation markers are never part
/// of the text.
struct Statement {
    std::string text;
    std::vector<int> citations;  // first-occurrence order, no duplicates
};

struct GroundedAnswer {
    std::vector<Statement> statements;
    AnswerStyle style = AnswerStyle::long_form;
    std::string raw_text;
    bool dropped_out_of_range = false;

    bool empty() const { return statements.empty(); }
};

/// Deduplicated union of cited passages, in first-citation order, together
/// with the display-index mapping of the producing round.
struct EvidenceSet {
    std::vector<std::string> pids;
    std::map<int, std::string> display_index_map;

    bool empty() const { return pids.empty(); }
};

/// Both parsers are total: no input raises, the worst case is an answer with
/// zero statements. `valid_ids` bounds the citable display indices;
/// out-of-range markers are dropped and flagged. Pass nullopt to accept any
/// index (trace re-parsing).
GroundedAnswer parse_long_form(const std::string& input,
                               const std::optional<std::set<int>>& valid_ids);

GroundedAnswer parse_entity_list(const std::string& input,
                                 const std::optional<std::set<int>>& valid_ids);

GroundedAnswer parse_answer(AnswerStyle style, const std::string& input,
                            const std::optional<std::set<int>>& valid_ids);

/// Citation union of the answer, resolved through the round's display map.
/// A citation missing from the map is an integrity error.
EvidenceSet evidence_set(const GroundedAnswer& answer,
                         const std::map<int, std::string>& display_map);

/// Inverse of the parsers: long form joins statements with single spaces and
/// places markers before terminal punctuation; entity lists render as
/// "e1 [c1], e2 [c2]". parse(render(a)) reproduces statements and citations.
std::string render(const GroundedAnswer& answer);

nlohmann::json answer_to_json(const GroundedAnswer& answer);
GroundedAnswer answer_from_json(const nlohmann::json& j);

}  // namespace calm
