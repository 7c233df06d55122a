#pragma once

#include <string>
#include <vector>

#include "calm/answer.hpp"

namespace calm {

struct Rouge2Score {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

enum class ConsistencyMetric { f1, precision, recall };

struct ConsistencyDecision {
    Rouge2Score score;
    double threshold = 0.0;
    bool accepted = false;
    std::vector<int> retained_statement_indices;
};

/// Tokenization for ROUGE: citation markers removed first, then lowercase
/// split on non-alphanumeric runs. Excluding markers means citation
/// renumbering can never change a consistency score.
std::vector<std::string> rouge_tokenize(const std::string& s);

/// Bigram-multiset overlap. A side with fewer than two tokens has zero
/// bigrams and its component scores 0.
Rouge2Score rouge2(const std::string& candidate, const std::string& reference);

/// Statement-level similarity used for intersection: ROUGE-2 F1, falling
/// back to unigram F1 when either side has fewer than two tokens (otherwise
/// one-word entities could never match).
double statement_match_score(const std::string& a, const std::string& b);

/// The acceptance gate of the loop: whole-answer ROUGE-2 between the
/// verifier output and the candidate, accepted iff score >= theta.
ConsistencyDecision is_consistent(const GroundedAnswer& verifier_answer,
                                  const GroundedAnswer& candidate, double theta,
                                  ConsistencyMetric metric = ConsistencyMetric::f1);

/// Candidate statements corroborated by at least one verifier statement at
/// theta_match, in original order with their citations, plus the union of
/// their citation indices in first-use order.
struct IntersectionResult {
    GroundedAnswer retained;                 // the corroborated subsequence of the candidate
    std::vector<size_t> retained_indices;    // positions within the candidate
    std::vector<int> retained_citations;     // union of retained citation indices
};

IntersectionResult intersect(const GroundedAnswer& candidate, const GroundedAnswer& verifier,
                             double theta_match);

}  // namespace calm
