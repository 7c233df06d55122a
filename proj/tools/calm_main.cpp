#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "calm/config.hpp"
#include "calm/errors.hpp"
#include "calm/evaluation.hpp"
#include "calm/jsonl.hpp"
#include "calm/sensitivity.hpp"

namespace {

using namespace calm;

struct PipelineOverrides {
    // CLI values override config-file values override built-in defaults
    std::optional<size_t> k;
    std::optional<double> theta;
    std::optional<size_t> max_iterations;
    std::optional<size_t> pool_size;

    void apply(PipelineConfig& p) const {
        if (k) p.k = *k;
        if (theta) p.theta = *theta;
        if (max_iterations) p.max_iterations = *max_iterations;
        if (pool_size) p.pool_size = *pool_size;
    }
};

void add_override_flags(CLI::App* cmd, PipelineOverrides& o) {
    cmd->add_option("--k", o.k, "reading budget per round");
    cmd->add_option("--theta", o.theta, "consistency threshold");
    cmd->add_option("--max-iterations", o.max_iterations, "maximum loop rounds");
    cmd->add_option("--pool-size", o.pool_size, "retrieval pool size");
}

int do_run(const std::string& config_path, const std::string& queries_path,
           const std::string& out_path, const PipelineOverrides& overrides, size_t jobs,
           bool baseline) {
    auto spec = load_run_spec(config_path);
    overrides.apply(spec.pipeline);
    spec.pipeline.validate();
    auto corpus = load_corpus(spec.corpus_path);
    auto retriever = make_retriever(spec, corpus);
    auto queries = load_queries(queries_path);
    auto main_backend = backend_of(spec, spec.pipeline.main_backend_id);
    std::shared_ptr<LmBackend> verifier;
    if (!baseline) verifier = backend_of(spec, spec.pipeline.verifier_backend_id);

    auto results = run_batch(spec.pipeline, queries, corpus, *retriever, *main_backend,
                             verifier.get(), spec.templates, baseline, jobs);
    write_trace_file(out_path, results);
    size_t failed = 0;
    for (const auto& r : results) failed += r.failed;
    std::cerr << (baseline ? "baseline" : "run") << ": " << results.size() << " queries, "
              << failed << " failed, trace written to " << out_path << "\n";
    return failed == results.size() && !results.empty() ? 1 : 0;
}

std::unique_ptr<EntailmentJudge> make_judge(const std::string& judge_arg) {
    if (judge_arg == "substring") return std::make_unique<SubstringJudge>();
    if (judge_arg.rfind("http:", 0) == 0) {
        return std::make_unique<HttpJudge>(judge_arg.substr(5));
    }
    throw ConfigError("judge must be 'substring' or 'http:URL'");
}

int do_eval(const std::string& trace_path, const std::string& gold_path,
            const std::string& corpus_path, const std::string& style_arg,
            const std::string& judge_arg, const std::string& out_path) {
    auto style = task_style_from_string(style_arg);
    auto corpus = load_corpus(corpus_path);
    auto gold = load_gold(gold_path, style);
    auto judge = make_judge(judge_arg);

    std::vector<QueryMetrics> rows;
    for (const auto& run : read_trace_file(trace_path)) {
        auto it = gold.find(run.qid);
        if (it == gold.end()) throw EvaluationError("no gold record for qid " + run.qid);
        rows.push_back(evaluate_run(run, it->second, corpus, *judge));
    }
    auto report = aggregate(std::move(rows), style);
    atomic_write_file(out_path, report_to_json(report).dump(2) + "\n");
    std::cerr << render_report(report);
    return 0;
}

int do_sensitivity(const std::string& config_path, const std::string& queries_path,
                   const std::string& gold_path, const std::string& targets_arg, uint64_t seed,
                   const std::string& out_path, size_t jobs) {
    auto spec = load_run_spec(config_path);
    auto corpus = load_corpus(spec.corpus_path);
    auto queries = load_queries(queries_path);
    auto gold = load_gold(gold_path, spec.task);

    std::vector<double> targets;
    std::stringstream ss(targets_arg);
    std::string item;
    while (std::getline(ss, item, ',')) targets.push_back(std::stod(item));
    if (targets.size() != 3) throw ConfigError("--targets needs three comma-separated values");

    auto anchors = build_anchor_sets(corpus, queries, gold, targets, seed);
    auto backend = backend_of(spec, spec.pipeline.main_backend_id);
    auto report = run_sensitivity(*backend, anchors, queries, gold, corpus,
                                  spec.templates.generate, jobs);
    atomic_write_file(out_path, sensitivity_report_to_json(report).dump(2) + "\n");
    std::cerr << "sensitivity report written to " << out_path << "\n";
    return 0;
}

std::string index_list(const std::vector<ShownDocRef>& docs) {
    std::string s;
    for (const auto& d : docs) {
        if (!s.empty()) s += ",";
        s += std::to_string(d.index);
    }
    return s;
}

int do_replay(const std::string& trace_path, const std::string& qid) {
    for (const auto& run : read_trace_file(trace_path)) {
        if (run.qid != qid) continue;
        std::cout << "Question: " << run.question << "\n";
        for (const auto& t : run.traces) {
            std::cout << "\nRound " << t.round << "\n";
            std::cout << "Access to: Document " << index_list(t.shown_docs) << "\n";
            std::cout << "Answer: " << render(t.candidate) << "\n";
            if (t.verifier_called) {
                std::cout << "Verifier access to: Document " << index_list(t.verifier_docs)
                          << "\n";
                std::cout << "Verifier answer: " << render(t.verifier_answer) << "\n";
                std::cout << "Consistency f1 " << t.decision.score.f1 << " vs threshold "
                          << t.decision.threshold << ": "
                          << (t.decision.accepted ? "accepted" : "rejected") << "\n";
                if (!t.decision.accepted) {
                    std::cout << "Retained: "
                              << (t.retained.empty() ? std::string{"(nothing)"}
                                                     : render(t.retained))
                              << "\n";
                }
            }
        }
        std::cout << "\nFinal (" << (run.accepted ? "accepted" : "not accepted") << ", round "
                  << run.rounds_used << "): " << render(run.final_answer) << "\n";
        return 0;
    }
    throw EvaluationError("qid not found in trace: " + qid);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"grounded question answering with verify-and-correct loops"};
    app.require_subcommand(1);

    std::string corpus_path, out_path, config_path, queries_path, trace_path, gold_path;
    std::string style_arg = "asqa_long_form", judge_arg = "substring", qid;
    std::string targets_arg = "0.27,0.56,0.78";
    double k1 = 1.2, b = 0.75;
    uint64_t seed = 0;
    size_t jobs = 1;
    PipelineOverrides overrides;

    auto* index_cmd = app.add_subcommand("index", "build a BM25 index file");
    index_cmd->add_option("--corpus", corpus_path)->required();
    index_cmd->add_option("--out", out_path)->required();
    index_cmd->add_option("--k1", k1);
    index_cmd->add_option("--b", b);

    auto* run_cmd = app.add_subcommand("run", "run the iterative pipeline");
    run_cmd->add_option("--config", config_path)->required();
    run_cmd->add_option("--queries", queries_path)->required();
    run_cmd->add_option("--out", out_path)->required();
    run_cmd->add_option("--jobs", jobs);
    add_override_flags(run_cmd, overrides);

    auto* baseline_cmd = app.add_subcommand("baseline", "single-pass cited generation");
    baseline_cmd->add_option("--config", config_path)->required();
    baseline_cmd->add_option("--queries", queries_path)->required();
    baseline_cmd->add_option("--out", out_path)->required();
    baseline_cmd->add_option("--jobs", jobs);
    add_override_flags(baseline_cmd, overrides);

    auto* eval_cmd = app.add_subcommand("eval", "score a trace against gold labels");
    eval_cmd->add_option("--trace", trace_path)->required();
    eval_cmd->add_option("--gold", gold_path)->required();
    eval_cmd->add_option("--corpus", corpus_path)->required();
    eval_cmd->add_option("--style", style_arg);
    eval_cmd->add_option("--judge", judge_arg, "substring or http:URL");
    eval_cmd->add_option("--out", out_path)->required();

    auto* sens_cmd = app.add_subcommand("sensitivity", "input-quality sensitivity analysis");
    sens_cmd->add_option("--config", config_path)->required();
    sens_cmd->add_option("--queries", queries_path)->required();
    sens_cmd->add_option("--gold", gold_path)->required();
    sens_cmd->add_option("--targets", targets_arg, "three recall targets, comma separated");
    sens_cmd->add_option("--seed", seed);
    sens_cmd->add_option("--out", out_path)->required();
    sens_cmd->add_option("--jobs", jobs);

    auto* replay_cmd = app.add_subcommand("replay", "pretty-print one run from a trace");
    replay_cmd->add_option("--trace", trace_path)->required();
    replay_cmd->add_option("--qid", qid)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        if (index_cmd->parsed()) {
            auto corpus = calm::load_corpus(corpus_path);
            calm::Bm25Index index(corpus, {k1, b});
            calm::atomic_write_file(out_path, index.to_json().dump() + "\n");
            std::cerr << "indexed " << corpus.size() << " passages to " << out_path << "\n";
            return 0;
        }
        if (run_cmd->parsed()) {
            return do_run(config_path, queries_path, out_path, overrides, jobs, false);
        }
        if (baseline_cmd->parsed()) {
            return do_run(config_path, queries_path, out_path, overrides, jobs, true);
        }
        if (eval_cmd->parsed()) {
            return do_eval(trace_path, gold_path, corpus_path, style_arg, judge_arg, out_path);
        }
        if (sens_cmd->parsed()) {
            return do_sensitivity(config_path, queries_path, gold_path, targets_arg, seed,
                                  out_path, jobs);
        }
        if (replay_cmd->parsed()) {
            return do_replay(trace_path, qid);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
