#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "calm/corpus.hpp"
#include "calm/evaluation.hpp"
#include "calm/lm.hpp"
#include "calm/pipeline.hpp"
#include "json.hpp"

namespace calm {

enum class AnchorLabel { low, med, high };

std::string to_string(AnchorLabel label);

/// One controlled-recall anchor: per query, a set of exactly five passages
/// whose mean answer recall across queries lands within 0.05 of the target.
struct AnchorPoint {
    AnchorLabel label = AnchorLabel::low;
    double target_recall = 0.0;
    std::vector<std::vector<std::string>> doc_sets;  // pids, aligned with the query order
    double measured_recall = 0.0;
};

struct SensitivityReport {
    double p_low = 0.0;
    double p_med = 0.0;
    double p_high = 0.0;
    std::optional<double> rel_improvement_low_to_med;
    std::optional<double> rel_improvement_med_to_high;
    std::optional<double> second_order_ratio;  // undefined unless p_med > p_low
    bool partial = false;                      // some queries failed
    std::vector<double> measured_recalls;      // low, med, high
};

/// (p_to - p_from) / p_from; undefined when p_from is not positive.
std::optional<double> relative_improvement(double p_from, double p_to);

/// (p_high - p_med) / (p_med - p_low); undefined unless p_med > p_low.
std::optional<double> second_order_gain(double p_low, double p_med, double p_high);

/// Recall of one doc set for one query: fraction of the gold short answers
/// contained (normalized substring) in at least one of the passages.
double doc_set_recall(const Corpus& corpus, const std::vector<std::string>& pids,
                      const std::vector<std::vector<std::string>>& short_answer_sets);

/// For each target, pick 5 passages per query (answer-bearing mixed with
/// distractors, seed-deterministic) so that mean recall hits the target
/// within 0.05. Infeasible targets raise a construction error naming the
/// achievable range.
std::vector<AnchorPoint> build_anchor_sets(const Corpus& corpus,
                                           const std::vector<QueryRecord>& queries,
                                           const std::map<std::string, GoldRecord>& gold,
                                           const std::vector<double>& targets, uint64_t seed);

/// Run the backend once per query and anchor over the anchor's 5-doc prompt,
/// score with EM recall, then derive the improvement ratios. Requires exactly
/// three anchors ordered low, med, high.
SensitivityReport run_sensitivity(LmBackend& backend, const std::vector<AnchorPoint>& anchors,
                                  const std::vector<QueryRecord>& queries,
                                  const std::map<std::string, GoldRecord>& gold,
                                  const Corpus& corpus, const PromptTemplate& generate_template,
                                  size_t jobs = 1);

nlohmann::json sensitivity_report_to_json(const SensitivityReport& report);

}  // namespace calm
