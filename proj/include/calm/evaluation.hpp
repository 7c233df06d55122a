#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "calm/answer.hpp"
#include "calm/corpus.hpp"
#include "calm/pipeline.hpp"
#include "calm/prompts.hpp"
#include "json.hpp"

namespace calm {

/// Gold labels for one query; only the fields of the query's task style are
/// populated (short answer sets for long-form QA, entities for list QA,
/// subclaims for explanation QA).
struct GoldRecord {
    std::string qid;
    TaskStyle style = TaskStyle::asqa_long_form;
    std::vector<std::vector<std::string>> short_answer_sets;
    std::vector<std::string> gold_entities;
    std::vector<std::string> subclaims;
};

/// Load a line-delimited gold file ({qid, short_answers?, entities?,
/// subclaims?} per line), keyed by qid.
std::map<std::string, GoldRecord> load_gold(const std::string& path, TaskStyle style);

/// Boolean premise-entails-hypothesis oracle. Implementations must be
/// deterministic for fixed inputs and safe for concurrent calls.
class EntailmentJudge {
public:
    virtual ~EntailmentJudge() = default;
    virtual bool judge(const std::string& premise, const std::string& hypothesis) const = 0;
};

/// Deterministic mock: entailed iff the normalized hypothesis is a substring
/// of the normalized premise.
class SubstringJudge : public EntailmentJudge {
public:
    bool judge(const std::string& premise, const std::string& hypothesis) const override;
};

/// Remote classifier adapter: POST {premise, hypothesis}, expects {entailed}.
class HttpJudge : public EntailmentJudge {
public:
    explicit HttpJudge(std::string url, int timeout_s = 30);
    bool judge(const std::string& premise, const std::string& hypothesis) const override;

private:
    std::string url_;
    int timeout_s_;
};

/// Fraction of required short answers with at least one surface form
/// appearing as a normalized substring of the answer text.
double em_recall(const std::string& answer_text,
                 const std::vector<std::vector<std::string>>& short_answer_sets);

/// Normalized exact-match entity metrics; recall is capped at 5 required
/// entities. Duplicate predictions are collapsed before matching.
std::pair<double, double> entity_precision_recall5(const std::vector<std::string>& pred,
                                                   const std::vector<std::string>& gold);

/// Fraction of subclaims entailed by the answer text.
double claim_recall(const std::string& answer_text, const std::vector<std::string>& subclaims,
                    const EntailmentJudge& judge);

/// Fraction of statements whose concatenated cited passages entail them;
/// statements without citations count as unsupported, empty answers score 0.
double citation_recall(const GroundedAnswer& answer, const Corpus& corpus,
                       const std::map<int, std::string>& display_map,
                       const EntailmentJudge& judge);

/// Fraction of citations that are relevant. A citation is irrelevant iff it
/// does not entail its statement alone and removing it leaves the statement's
/// collective support unchanged. Answers with zero citations score 0.
double citation_precision(const GroundedAnswer& answer, const Corpus& corpus,
                          const std::map<int, std::string>& display_map,
                          const EntailmentJudge& judge);

struct QueryMetrics {
    std::string qid;
    bool failed = false;
    std::optional<double> em_recall;
    std::optional<double> entity_precision;
    std::optional<double> entity_recall5;
    std::optional<double> claim_recall;
    std::optional<double> citation_recall;
    std::optional<double> citation_precision;
    std::optional<double> average;  // mean of the style's reported metrics
};

struct MetricsReport {
    TaskStyle style = TaskStyle::asqa_long_form;
    size_t query_count = 0;
    bool empty = true;
    QueryMetrics means;  // qid left blank; failed = any row failed
    std::vector<QueryMetrics> rows;
};

/// Per-query metric row for one finished run. Failed runs yield a failed row
/// with no metric values.
QueryMetrics evaluate_run(const RunResult& run, const GoldRecord& gold, const Corpus& corpus,
                          const EntailmentJudge& judge);

/// Unweighted means over the rows; empty input yields an empty-flagged report.
MetricsReport aggregate(std::vector<QueryMetrics> rows, TaskStyle style);

nlohmann::json report_to_json(const MetricsReport& report);

/// Plain-text table rendering of the report for terminals and logs.
std::string render_report(const MetricsReport& report);

}  // namespace calm
