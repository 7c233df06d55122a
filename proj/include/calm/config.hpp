#pragma once

#include <map>
#include <memory>
#include <string>

#include "calm/lm.hpp"
#include "calm/pipeline.hpp"
#include "calm/retrieval.hpp"
#include "json.hpp"

namespace calm {

/// Everything a run needs, loaded from one JSON file:
///   task        "asqa_long_form" | "qampari_entity_list" | "eli5_long_form"
///   corpus      path to the corpus JSONL
///   pipeline    {k, theta, theta_match, max_iterations, pool_size,
///                consistency_metric, skip_final_verification, max_tokens,
///                temperature} (all optional, defaults apply)
///   retriever   {"type": "bm25"}                     build an index in memory
///               {"type": "bm25_index", "path": P}    load a prebuilt index
///               {"type": "ranking_file", "path": P}  precomputed rankings
///   backends    name -> {"type": "http", url, model, credential_env, ...}
///               name -> {"type": "scripted", "behavior": B, ...} with B one
///               of rules|constant|echo_question|echo_of|cite_all|extractive
///   templates   optional {generate: path, correct: path} overrides
struct RunSpec {
    TaskStyle task = TaskStyle::asqa_long_form;
    std::string corpus_path;
    PipelineConfig pipeline;
    nlohmann::json retriever;
    std::map<std::string, std::shared_ptr<LmBackend>> backends;
    PromptTemplates templates;
};

RunSpec load_run_spec(const std::string& path);

/// Instantiate the retriever the spec asks for (bm25 builds over `corpus`).
std::unique_ptr<Retriever> make_retriever(const RunSpec& spec, const Corpus& corpus);

/// The backend registered under `name`; missing names are config errors.
std::shared_ptr<LmBackend> backend_of(const RunSpec& spec, const std::string& name);

}  // namespace calm
