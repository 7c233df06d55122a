#include "calm/config.hpp"

#include <filesystem>
#include <fstream>

#include "calm/errors.hpp"

namespace calm {
namespace {

std::string resolve_relative(const std::string& base_dir, const std::string& path) {
    std::filesystem::path p(path);
    if (p.is_absolute() || base_dir.empty()) return path;
    return (std::filesystem::path(base_dir) / p).string();
}

void apply_pipeline_keys(PipelineConfig& p, const nlohmann::json& j) {
    p.k = j.value("k", p.k);
    p.theta = j.value("theta", p.theta);
    p.theta_match = j.value("theta_match", p.theta_match);
    p.max_iterations = j.value("max_iterations", p.max_iterations);
    p.pool_size = j.value("pool_size", p.pool_size);
    p.skip_final_verification = j.value("skip_final_verification", p.skip_final_verification);
    p.max_tokens = j.value("max_tokens", p.max_tokens);
    p.temperature = j.value("temperature", p.temperature);
    p.main_backend_id = j.value("main_backend", p.main_backend_id);
    p.verifier_backend_id = j.value("verifier_backend", p.verifier_backend_id);
    if (j.contains("consistency_metric")) {
        auto m = j.at("consistency_metric").get<std::string>();
        if (m == "f1") {
            p.consistency_metric = ConsistencyMetric::f1;
        } else if (m == "precision") {
            p.consistency_metric = ConsistencyMetric::precision;
        } else if (m == "recall") {
            p.consistency_metric = ConsistencyMetric::recall;
        } else {
            throw ConfigError("unknown consistency_metric: " + m);
        }
    }
}

std::shared_ptr<LmBackend> make_scripted(const std::string& name, const nlohmann::json& j,
                                         const std::map<std::string, std::shared_ptr<LmBackend>>&
                                             built) {
    auto behavior = j.value("behavior", std::string{"rules"});
    if (behavior == "rules") {
        std::vector<std::pair<std::string, std::string>> rules;
        for (const auto& r : j.at("rules")) {
            rules.emplace_back(r.value("contains", std::string{}),
                               r.at("reply").get<std::string>());
        }
        return make_rules_backend(name, std::move(rules));
    }
    if (behavior == "constant") return make_constant_backend(name, j.at("reply").get<std::string>());
    if (behavior == "echo_question") return make_echo_question_backend(name);
    if (behavior == "echo_of") {
        auto source = j.at("source").get<std::string>();
        auto it = built.find(source);
        if (it == built.end()) {
            throw ConfigError("echo_of backend '" + name + "' references unknown backend '" +
                              source + "'");
        }
        auto scripted = std::dynamic_pointer_cast<ScriptedBackend>(it->second);
        if (!scripted) {
            throw ConfigError("echo_of backend '" + name + "' needs a scripted source");
        }
        return make_echo_of_backend(name, std::move(scripted));
    }
    if (behavior == "cite_all") return make_cite_all_backend(name);
    if (behavior == "extractive") {
        return make_extractive_backend(name, j.value("noise_prob", 0.0),
                                       j.value("seed", uint64_t{0}));
    }
    throw ConfigError("unknown scripted behavior: " + behavior);
}

}  // namespace

RunSpec load_run_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }

    // paths inside the config resolve relative to the config file itself
    auto base_dir = std::filesystem::path(path).parent_path().string();

    RunSpec spec;
    spec.task = task_style_from_string(j.value("task", std::string{"asqa_long_form"}));
    spec.pipeline.task_style = spec.task;
    // per-style default threshold; an explicit pipeline.theta still wins
    if (spec.task == TaskStyle::eli5_long_form) spec.pipeline.theta = 0.25;
    if (!j.contains("corpus")) throw ConfigError("config needs a 'corpus' path");
    spec.corpus_path = resolve_relative(base_dir, j.at("corpus").get<std::string>());
    if (j.contains("pipeline")) apply_pipeline_keys(spec.pipeline, j.at("pipeline"));
    spec.retriever = j.value("retriever", nlohmann::json{{"type", "bm25"}});
    if (spec.retriever.contains("path")) {
        spec.retriever["path"] =
            resolve_relative(base_dir, spec.retriever.at("path").get<std::string>());
    }

    if (j.contains("backends")) {
        // two passes so echo_of can reference siblings regardless of order
        const auto& backends = j.at("backends");
        for (const auto& [name, bj] : backends.items()) {
            auto type = bj.value("type", std::string{"scripted"});
            if (type == "http") {
                HttpBackendConfig config;
                config.url = bj.at("url").get<std::string>();
                config.model = bj.value("model", std::string{});
                config.credential_env = bj.value("credential_env", std::string{});
                config.timeout_s = bj.value("timeout_s", config.timeout_s);
                config.max_retries = bj.value("max_retries", config.max_retries);
                config.backoff_base_ms = bj.value("backoff_base_ms", config.backoff_base_ms);
                spec.backends[name] = std::make_shared<HttpBackend>(name, std::move(config));
            } else if (type == "scripted") {
                if (bj.value("behavior", std::string{}) == "echo_of") continue;
                spec.backends[name] = make_scripted(name, bj, spec.backends);
            } else {
                throw ConfigError("unknown backend type: " + type);
            }
        }
        for (const auto& [name, bj] : backends.items()) {
            if (bj.value("behavior", std::string{}) == "echo_of") {
                spec.backends[name] = make_scripted(name, bj, spec.backends);
            }
        }
    }

    spec.templates = default_templates(spec.task);
    if (j.contains("templates")) {
        const auto& t = j.at("templates");
        if (t.contains("generate")) {
            spec.templates.generate =
                load_template(spec.task, PromptMode::generate,
                              resolve_relative(base_dir, t.at("generate").get<std::string>()));
        }
        if (t.contains("correct")) {
            spec.templates.correct =
                load_template(spec.task, PromptMode::correct,
                              resolve_relative(base_dir, t.at("correct").get<std::string>()));
        }
    }
    spec.pipeline.validate();
    return spec;
}

std::unique_ptr<Retriever> make_retriever(const RunSpec& spec, const Corpus& corpus) {
    auto type = spec.retriever.value("type", std::string{"bm25"});
    if (type == "bm25") {
        Bm25Params params;
        params.k1 = spec.retriever.value("k1", params.k1);
        params.b = spec.retriever.value("b", params.b);
        auto index = std::make_shared<Bm25Index>(corpus, params);
        return std::make_unique<Bm25Retriever>(std::move(index));
    }
    if (type == "bm25_index") {
        std::ifstream in(spec.retriever.at("path").get<std::string>());
        if (!in) throw ConfigError("cannot open index file");
        nlohmann::json j;
        in >> j;
        auto index = std::make_shared<Bm25Index>(Bm25Index::from_json(j));
        return std::make_unique<Bm25Retriever>(std::move(index));
    }
    if (type == "ranking_file") {
        return std::make_unique<RankingFileRetriever>(
            spec.retriever.at("path").get<std::string>());
    }
    throw ConfigError("unknown retriever type: " + type);
}

std::shared_ptr<LmBackend> backend_of(const RunSpec& spec, const std::string& name) {
    auto it = spec.backends.find(name);
    if (it == spec.backends.end()) throw ConfigError("no backend named '" + name + "'");
    return it->second;
}

}  // namespace calm
