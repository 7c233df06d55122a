#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "calm/answer.hpp"
#include "calm/consistency.hpp"
#include "calm/corpus.hpp"
#include "calm/lm.hpp"
#include "calm/prompts.hpp"
#include "calm/retrieval.hpp"
#include "json.hpp"

namespace calm {

struct PipelineConfig {
    size_t k = 5;          // reading budget per round
    double theta = 0.5;    // consistency threshold (0.25 suits ELI5-style runs)
    double theta_match = -1.0;  // statement-match threshold; < 0 means "use theta"
    size_t max_iterations = 4;  // T
    size_t pool_size = 100;
    TaskStyle task_style = TaskStyle::asqa_long_form;
    std::string main_backend_id = "main";
    std::string verifier_backend_id = "verifier";
    ConsistencyMetric consistency_metric = ConsistencyMetric::f1;
    // With this on (the default), the final round is emitted without
    // verification, which bounds verifier calls by T-1.
    bool skip_final_verification = true;
    int max_tokens = 1024;
    double temperature = 0.0;

    double effective_theta_match() const { return theta_match < 0.0 ? theta : theta_match; }
    void validate() const;
};

struct ShownDocRef {
    int index = 0;
    std::string pid;
};

/// Full record of one loop round; stores every prompt and raw completion so
/// that runs can be replayed and every decision recomputed.
struct IterationTrace {
    int round = 0;
    std::vector<ShownDocRef> shown_docs;
    std::string generation_prompt;
    std::string main_raw;
    GroundedAnswer candidate;
    EvidenceSet evidence;
    bool verifier_called = false;
    std::vector<ShownDocRef> verifier_docs;
    std::string verifier_prompt;
    std::string verifier_raw;
    GroundedAnswer verifier_answer;
    ConsistencyDecision decision;
    GroundedAnswer retained;               // A-bar
    std::vector<int> retained_citations;   // G-bar (display indices)
};

struct RunResult {
    std::string qid;
    std::string question;
    GroundedAnswer final_answer;
    std::map<int, std::string> display_map;  // display index -> pid, whole run
    bool accepted = false;
    int rounds_used = 0;
    size_t main_calls = 0;
    size_t verifier_calls = 0;
    std::vector<IterationTrace> traces;
    bool failed = false;
    std::string error;
    nlohmann::json gold;  // opaque passthrough from the queries file
};

struct QueryRecord {
    std::string qid;
    std::string question;
    nlohmann::json gold;
};

std::vector<QueryRecord> load_queries(const std::string& path);

struct PromptTemplates {
    PromptTemplate generate;
    PromptTemplate correct;
};

PromptTemplates default_templates(TaskStyle task);

/// The iterative contrast-and-correct loop: retrieve once, then per round
/// draft with the main LM, re-answer with the verifier over only the cited
/// documents, gate on ROUGE-2, and carry the corroborated statements plus
/// their documents into the next round.
RunResult run_query(const PipelineConfig& config, const QueryRecord& query,
                    const Corpus& corpus, const Retriever& retriever, LmBackend& main_backend,
                    LmBackend& verifier_backend, const PromptTemplates& templates);

/// Single retrieval + single generation with the top-k documents; no
/// verification (the one-call in-context-citation baseline).
RunResult run_baseline_iclcite(const PipelineConfig& config, const QueryRecord& query,
                               const Corpus& corpus, const Retriever& retriever,
                               LmBackend& main_backend, const PromptTemplates& templates);

/// Runs every query (optionally across `jobs` threads), in deterministic
/// qid order; per-query failures become failed RunResults and the batch
/// continues. `baseline` selects the single-run path.
std::vector<RunResult> run_batch(const PipelineConfig& config,
                                 const std::vector<QueryRecord>& queries, const Corpus& corpus,
                                 const Retriever& retriever, LmBackend& main_backend,
                                 LmBackend* verifier_backend, const PromptTemplates& templates,
                                 bool baseline = false, size_t jobs = 1);

nlohmann::json run_result_to_json(const RunResult& result);
RunResult run_result_from_json(const nlohmann::json& j);

void write_trace_file(const std::string& path, const std::vector<RunResult>& results);
std::vector<RunResult> read_trace_file(const std::string& path);

}  // namespace calm
