#include "calm/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include "calm/errors.hpp"
#include "calm/jsonl.hpp"

namespace calm {
namespace {

nlohmann::json docs_to_json(const std::vector<ShownDocRef>& docs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : docs) arr.push_back({{"index", d.index}, {"pid", d.pid}});
    return arr;
}

std::vector<ShownDocRef> docs_from_json(const nlohmann::json& arr) {
    std::vector<ShownDocRef> docs;
    for (const auto& d : arr) {
        docs.push_back({d.at("index").get<int>(), d.at("pid").get<std::string>()});
    }
    return docs;
}

nlohmann::json decision_to_json(const ConsistencyDecision& d) {
    return {{"precision", d.score.precision},
            {"recall", d.score.recall},
            {"f1", d.score.f1},
            {"threshold", d.threshold},
            {"accepted", d.accepted}};
}

ConsistencyDecision decision_from_json(const nlohmann::json& j) {
    ConsistencyDecision d;
    d.score.precision = j.at("precision").get<double>();
    d.score.recall = j.at("recall").get<double>();
    d.score.f1 = j.at("f1").get<double>();
    d.threshold = j.at("threshold").get<double>();
    d.accepted = j.at("accepted").get<bool>();
    return d;
}

std::set<int> index_set(const std::vector<std::pair<int, Passage>>& docs) {
    std::set<int> ids;
    for (const auto& [index, passage] : docs) ids.insert(index);
    return ids;
}

std::vector<ShownDocRef> to_refs(const std::vector<std::pair<int, Passage>>& docs) {
    std::vector<ShownDocRef> refs;
    for (const auto& [index, passage] : docs) refs.push_back({index, passage.pid});
    return refs;
}

LmResponse call_backend(LmBackend& backend, const PipelineConfig& config,
                        const std::string& prompt) {
    LmRequest request;
    request.prompt = prompt;
    request.max_tokens = config.max_tokens;
    request.temperature = config.temperature;
    return backend.complete(request);
}

}  // namespace

void PipelineConfig::validate() const {
    if (max_iterations < 1) throw ConfigError("T must be >= 1");
    if (k < 1 || k > pool_size) throw ConfigError("require 1 <= k <= pool_size");
    if (theta < 0.0 || theta > 1.0) throw ConfigError("theta must lie in [0,1]");
}

std::vector<QueryRecord> load_queries(const std::string& path) {
    std::vector<QueryRecord> queries;
    for (const auto& rec : read_jsonl(path)) {
        QueryRecord q;
        q.qid = rec.at("qid").get<std::string>();
        q.question = rec.at("question").get<std::string>();
        q.gold = rec.value("gold", nlohmann::json());
        queries.push_back(std::move(q));
    }
    return queries;
}

PromptTemplates default_templates(TaskStyle task) {
    return {default_template(task, PromptMode::generate),
            default_template(task, PromptMode::correct)};
}

RunResult run_query(const PipelineConfig& config, const QueryRecord& query,
                    const Corpus& corpus, const Retriever& retriever, LmBackend& main_backend,
                    LmBackend& verifier_backend, const PromptTemplates& templates) {
    config.validate();
    const AnswerStyle style = answer_style_of(config.task_style);

    RunResult result;
    result.qid = query.qid;
    result.question = query.question;
    result.gold = query.gold;
    result.final_answer.style = style;

    auto pool = retriever.pool_for(query.qid, query.question, config.pool_size);

    int next_display_index = 1;
    std::vector<ShownDocRef> retained_docs;
    GroundedAnswer draft;
    draft.style = style;

    for (size_t t = 1; t <= config.max_iterations; ++t) {
        // (2) shown docs: verified documents keep their original display
        // indices and come first; fresh passages fill the budget with
        // strictly increasing new indices.
        std::set<std::string> exclude;
        std::vector<std::pair<int, Passage>> shown;
        for (const auto& d : retained_docs) {
            exclude.insert(d.pid);
            shown.emplace_back(d.index, corpus.by_pid(d.pid));
        }
        size_t needed = config.k > shown.size() ? config.k - shown.size() : 0;
        for (auto& passage : pool.next_batch(corpus, needed, exclude)) {
            int index = next_display_index++;
            result.display_map[index] = passage.pid;
            shown.emplace_back(index, std::move(passage));
        }
        if (shown.empty()) break;  // pool exhausted with nothing retained

        IterationTrace trace;
        trace.round = static_cast<int>(t);
        trace.shown_docs = to_refs(shown);

        trace.generation_prompt =
            t == 1 ? render_generation_prompt(templates.generate, query.question, shown)
                   : render_correction_prompt(templates.correct, query.question, shown, draft,
                                              retained_docs.size());
        auto main_response = call_backend(main_backend, config, trace.generation_prompt);
        ++result.main_calls;
        trace.main_raw = main_response.text;
        trace.candidate = parse_answer(style, main_response.text, index_set(shown));

        result.final_answer = trace.candidate;
        result.rounds_used = static_cast<int>(t);

        const bool final_round = t == config.max_iterations;
        if (final_round && config.skip_final_verification) {
            result.traces.push_back(std::move(trace));
            break;
        }

        // (3) verifier sees only the cited documents, under their original
        // display indices, in ascending index order.
        trace.evidence = evidence_set(trace.candidate, result.display_map);
        if (trace.evidence.empty()) {
            // nothing for the verifier to read: the round is inconsistent
            trace.decision.threshold = config.theta;
            trace.decision.accepted = false;
            trace.retained.style = style;
            retained_docs.clear();
            draft = trace.retained;
            result.traces.push_back(std::move(trace));
            continue;
        }
        std::vector<std::pair<int, Passage>> verifier_docs;
        for (const auto& [index, pid] : trace.evidence.display_index_map) {
            verifier_docs.emplace_back(index, corpus.by_pid(pid));
        }
        trace.verifier_docs = to_refs(verifier_docs);
        trace.verifier_prompt =
            render_generation_prompt(templates.generate, query.question, verifier_docs);
        auto verifier_response = call_backend(verifier_backend, config, trace.verifier_prompt);
        ++result.verifier_calls;
        trace.verifier_called = true;
        trace.verifier_raw = verifier_response.text;
        trace.verifier_answer =
            parse_answer(style, verifier_response.text, index_set(verifier_docs));

        // (4) consistency gate
        trace.decision = is_consistent(trace.verifier_answer, trace.candidate, config.theta,
                                       config.consistency_metric);
        if (trace.decision.accepted) {
            result.accepted = true;
            result.traces.push_back(std::move(trace));
            return result;
        }

        // (5) keep the corroborated statements and their documents
        auto intersection =
            intersect(trace.candidate, trace.verifier_answer, config.effective_theta_match());
        trace.retained = intersection.retained;
        trace.retained_citations = intersection.retained_citations;
        draft = intersection.retained;
        retained_docs.clear();
        auto sorted_citations = intersection.retained_citations;
        std::sort(sorted_citations.begin(), sorted_citations.end());
        for (int index : sorted_citations) {
            retained_docs.push_back({index, result.display_map.at(index)});
        }
        result.traces.push_back(std::move(trace));
    }

    return result;  // max iteration reached: last answer candidate stands
}

RunResult run_baseline_iclcite(const PipelineConfig& config, const QueryRecord& query,
                               const Corpus& corpus, const Retriever& retriever,
                               LmBackend& main_backend, const PromptTemplates& templates) {
    config.validate();
    const AnswerStyle style = answer_style_of(config.task_style);

    RunResult result;
    result.qid = query.qid;
    result.question = query.question;
    result.gold = query.gold;
    result.final_answer.style = style;
    result.accepted = true;  // by convention: nothing to verify in a single run
    result.rounds_used = 1;

    auto pool = retriever.pool_for(query.qid, query.question, config.pool_size);
    std::vector<std::pair<int, Passage>> shown;
    int next_display_index = 1;
    for (auto& passage : pool.next_batch(corpus, config.k, {})) {
        int index = next_display_index++;
        result.display_map[index] = passage.pid;
        shown.emplace_back(index, std::move(passage));
    }
    if (shown.empty()) {
        result.failed = true;
        result.error = "no documents retrieved";
        return result;
    }

    IterationTrace trace;
    trace.round = 1;
    trace.shown_docs = to_refs(shown);
    trace.generation_prompt =
        render_generation_prompt(templates.generate, query.question, shown);
    auto response = call_backend(main_backend, config, trace.generation_prompt);
    ++result.main_calls;
    trace.main_raw = response.text;
    trace.candidate = parse_answer(style, response.text, index_set(shown));
    result.final_answer = trace.candidate;
    result.traces.push_back(std::move(trace));
    return result;
}

std::vector<RunResult> run_batch(const PipelineConfig& config,
                                 const std::vector<QueryRecord>& queries, const Corpus& corpus,
                                 const Retriever& retriever, LmBackend& main_backend,
                                 LmBackend* verifier_backend, const PromptTemplates& templates,
                                 bool baseline, size_t jobs) {
    if (!baseline && verifier_backend == nullptr) {
        throw ConfigError("pipeline runs need a verifier backend");
    }
    auto ordered = queries;
    std::sort(ordered.begin(), ordered.end(),
              [](const QueryRecord& a, const QueryRecord& b) { return a.qid < b.qid; });

    std::vector<RunResult> results(ordered.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= ordered.size()) return;
            try {
                results[i] = baseline
                                 ? run_baseline_iclcite(config, ordered[i], corpus, retriever,
                                                        main_backend, templates)
                                 : run_query(config, ordered[i], corpus, retriever, main_backend,
                                             *verifier_backend, templates);
            } catch (const std::exception& e) {
                RunResult failed;
                failed.qid = ordered[i].qid;
                failed.question = ordered[i].question;
                failed.gold = ordered[i].gold;
                failed.failed = true;
                failed.error = e.what();
                results[i] = std::move(failed);
            }
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (size_t i = 0; i < jobs; ++i) threads.emplace_back(worker);
        for (auto& th : threads) th.join();
    }
    return results;
}

nlohmann::json run_result_to_json(const RunResult& result) {
    nlohmann::json traces = nlohmann::json::array();
    for (const auto& t : result.traces) {
        nlohmann::json evidence = nlohmann::json::object();
        for (const auto& [index, pid] : t.evidence.display_index_map) {
            evidence[std::to_string(index)] = pid;
        }
        traces.push_back({{"round", t.round},
                          {"shown_docs", docs_to_json(t.shown_docs)},
                          {"generation_prompt", t.generation_prompt},
                          {"main_raw", t.main_raw},
                          {"candidate", answer_to_json(t.candidate)},
                          {"evidence_pids", t.evidence.pids},
                          {"evidence_map", std::move(evidence)},
                          {"verifier_called", t.verifier_called},
                          {"verifier_docs", docs_to_json(t.verifier_docs)},
                          {"verifier_prompt", t.verifier_prompt},
                          {"verifier_raw", t.verifier_raw},
                          {"verifier_answer", answer_to_json(t.verifier_answer)},
                          {"decision", decision_to_json(t.decision)},
                          {"retained", answer_to_json(t.retained)},
                          {"retained_citations", t.retained_citations}});
    }
    nlohmann::json display_map = nlohmann::json::object();
    for (const auto& [index, pid] : result.display_map) {
        display_map[std::to_string(index)] = pid;
    }
    return {{"qid", result.qid},
            {"question", result.question},
            {"final_answer", answer_to_json(result.final_answer)},
            {"display_map", std::move(display_map)},
            {"accepted", result.accepted},
            {"rounds_used", result.rounds_used},
            {"main_calls", result.main_calls},
            {"verifier_calls", result.verifier_calls},
            {"failed", result.failed},
            {"error", result.error},
            {"gold", result.gold},
            {"traces", std::move(traces)}};
}

RunResult run_result_from_json(const nlohmann::json& j) {
    RunResult r;
    r.qid = j.at("qid").get<std::string>();
    r.question = j.value("question", std::string{});
    r.final_answer = answer_from_json(j.at("final_answer"));
    for (const auto& [key, pid] : j.at("display_map").items()) {
        r.display_map[std::stoi(key)] = pid.get<std::string>();
    }
    r.accepted = j.at("accepted").get<bool>();
    r.rounds_used = j.at("rounds_used").get<int>();
    r.main_calls = j.value("main_calls", size_t{0});
    r.verifier_calls = j.value("verifier_calls", size_t{0});
    r.failed = j.value("failed", false);
    r.error = j.value("error", std::string{});
    r.gold = j.value("gold", nlohmann::json());
    for (const auto& tj : j.at("traces")) {
        IterationTrace t;
        t.round = tj.at("round").get<int>();
        t.shown_docs = docs_from_json(tj.at("shown_docs"));
        t.generation_prompt = tj.value("generation_prompt", std::string{});
        t.main_raw = tj.value("main_raw", std::string{});
        t.candidate = answer_from_json(tj.at("candidate"));
        t.evidence.pids = tj.value("evidence_pids", std::vector<std::string>{});
        if (tj.contains("evidence_map")) {
            for (const auto& [key, pid] : tj.at("evidence_map").items()) {
                t.evidence.display_index_map[std::stoi(key)] = pid.get<std::string>();
            }
        }
        t.verifier_called = tj.value("verifier_called", false);
        t.verifier_docs = docs_from_json(tj.value("verifier_docs", nlohmann::json::array()));
        t.verifier_prompt = tj.value("verifier_prompt", std::string{});
        t.verifier_raw = tj.value("verifier_raw", std::string{});
        t.verifier_answer = answer_from_json(tj.at("verifier_answer"));
        t.decision = decision_from_json(tj.at("decision"));
        t.retained = answer_from_json(tj.at("retained"));
        t.retained_citations = tj.value("retained_citations", std::vector<int>{});
        r.traces.push_back(std::move(t));
    }
    return r;
}

void write_trace_file(const std::string& path, const std::vector<RunResult>& results) {
    std::string content;
    for (const auto& r : results) {
        content += run_result_to_json(r).dump();
        content += "\n";
    }
    atomic_write_file(path, content);
}

std::vector<RunResult> read_trace_file(const std::string& path) {
    std::vector<RunResult> results;
    for (const auto& rec : read_jsonl(path)) results.push_back(run_result_from_json(rec));
    return results;
}

}  // namespace calm
