#include "calm/consistency.hpp"

#include <algorithm>
#include <map>

#include "calm/errors.hpp"
#include "calm/text.hpp"

namespace calm {
namespace {

std::map<std::string, int> bigram_counts(const std::vector<std::string>& tokens) {
    std::map<std::string, int> counts;
    for (size_t i = 0; i + 1 < tokens.size(); ++i) {
        ++counts[tokens[i] + "\x1f" + tokens[i + 1]];
    }
    return counts;
}

std::map<std::string, int> unigram_counts(const std::vector<std::string>& tokens) {
    std::map<std::string, int> counts;
    for (const auto& t : tokens) ++counts[t];
    return counts;
}

size_t multiset_overlap(const std::map<std::string, int>& a, const std::map<std::string, int>& b) {
    size_t overlap = 0;
    for (const auto& [key, count] : a) {
        auto it = b.find(key);
        if (it != b.end()) overlap += static_cast<size_t>(std::min(count, it->second));
    }
    return overlap;
}

size_t total(const std::map<std::string, int>& m) {
    size_t n = 0;
    for (const auto& [k, c] : m) n += static_cast<size_t>(c);
    return n;
}

Rouge2Score pr_f1(size_t overlap, size_t cand_total, size_t ref_total) {
    Rouge2Score s;
    s.precision = cand_total == 0 ? 0.0 : static_cast<double>(overlap) / cand_total;
    s.recall = ref_total == 0 ? 0.0 : static_cast<double>(overlap) / ref_total;
    s.f1 = (s.precision + s.recall) > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    return s;
}

double unigram_f1(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    auto ca = unigram_counts(a);
    auto cb = unigram_counts(b);
    return pr_f1(multiset_overlap(ca, cb), total(ca), total(cb)).f1;
}

}  // namespace

std::vector<std::string> rouge_tokenize(const std::string& s) {
    return text::tokenize(text::strip_citation_markers(s));
}

Rouge2Score rouge2(const std::string& candidate, const std::string& reference) {
    auto cand = bigram_counts(rouge_tokenize(candidate));
    auto ref = bigram_counts(rouge_tokenize(reference));
    return pr_f1(multiset_overlap(cand, ref), total(cand), total(ref));
}

double statement_match_score(const std::string& a, const std::string& b) {
    auto ta = rouge_tokenize(a);
    auto tb = rouge_tokenize(b);
    if (ta.size() < 2 || tb.size() < 2) return unigram_f1(ta, tb);
    return rouge2(a, b).f1;
}

ConsistencyDecision is_consistent(const GroundedAnswer& verifier_answer,
                                  const GroundedAnswer& candidate, double theta,
                                  ConsistencyMetric metric) {
    if (theta < 0.0 || theta > 1.0) throw IntegrityError("theta must lie in [0,1]");
    ConsistencyDecision decision;
    decision.threshold = theta;
    decision.score = rouge2(render(verifier_answer), render(candidate));
    double value = decision.score.f1;
    if (metric == ConsistencyMetric::precision) value = decision.score.precision;
    if (metric == ConsistencyMetric::recall) value = decision.score.recall;
    decision.accepted = value >= theta;
    return decision;
}

IntersectionResult intersect(const GroundedAnswer& candidate, const GroundedAnswer& verifier,
                             double theta_match) {
    IntersectionResult result;
    result.retained.style = candidate.style;
    for (size_t i = 0; i < candidate.statements.size(); ++i) {
        const auto& st = candidate.statements[i];
        double best = 0.0;
        for (const auto& vs : verifier.statements) {
            best = std::max(best, statement_match_score(st.text, vs.text));
        }
        if (best >= theta_match && !verifier.statements.empty()) {
            result.retained.statements.push_back(st);
            result.retained_indices.push_back(i);
            for (int c : st.citations) {
                auto& g = result.retained_citations;
                if (std::find(g.begin(), g.end(), c) == g.end()) g.push_back(c);
            }
        }
    }
    result.retained.raw_text = render(result.retained);
    return result;
}

}  // namespace calm
