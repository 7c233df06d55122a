#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "calm/answer.hpp"

namespace calm {

struct LmRequest {
    std::string prompt;
    int max_tokens = 1024;
    double temperature = 0.0;  // deterministic by default for all pipeline calls
    std::vector<std::string> stop;
};

struct LmResponse {
    std::string text;
    size_t prompt_tokens = 0;
    size_t completion_tokens = 0;
    std::string backend_id;
    long latency_ms = 0;
};

class LmBackend {
public:
    virtual ~LmBackend() = default;
    virtual LmResponse complete(const LmRequest& request) = 0;
    virtual const std::string& id() const = 0;
};

struct HttpBackendConfig {
    std::string url;        // full endpoint URL, e.g. http://host:port/v1/complete
    std::string model;
    std::string credential_env;  // env var holding the bearer token; empty = no auth
    int timeout_s = 30;
    int max_retries = 2;
    int backoff_base_ms = 200;
};

/// Generic single-endpoint completion client. Sends
/// {model, prompt, max_tokens, temperature, stop} and expects {text}.
/// Transport failures and 5xx responses are retried with exponential
/// backoff; other failures surface immediately as BackendError.
class HttpBackend : public LmBackend {
public:
    HttpBackend(std::string id, HttpBackendConfig config);
    LmResponse complete(const LmRequest& request) override;
    const std::string& id() const override { return id_; }

private:
    std::string id_;
    HttpBackendConfig config_;
};

/// Deterministic scripted backend: answers with the first matching rule.
/// Reply functions may inspect the prompt (question, shown documents, draft)
/// to simulate main or verifier behaviour. No matching rule is a ScriptError.
class ScriptedBackend : public LmBackend {
public:
    struct Rule {
        std::function<bool(const std::string& prompt)> matches;
        std::function<std::string(const std::string& prompt)> reply;
    };

    ScriptedBackend(std::string id, std::vector<Rule> rules);
    LmResponse complete(const LmRequest& request) override;
    const std::string& id() const override { return id_; }

    size_t call_count() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return call_count_;
    }
    std::string last_reply() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return last_reply_;
    }

private:
    std::string id_;
    std::vector<Rule> rules_;
    mutable std::mutex mutex_;
    size_t call_count_ = 0;
    std::string last_reply_;
};

// ---- prompt introspection for scripted behaviours ----

struct ShownDoc {
    int index = 0;
    std::string title;
    std::string text;
};

/// Documents of the final query block (after the last "Question:" line),
/// parsed from "Document [i](Title: t): text" lines.
std::vector<ShownDoc> prompt_docs(const std::string& prompt);

/// The last "Question:" line's content.
std::string prompt_question(const std::string& prompt);

/// Content of the "Drafted Solution:" line, empty if absent.
std::optional<std::string> prompt_draft(const std::string& prompt);

// ---- stock scripted behaviours ----

/// First-match substring rules; reply strings are returned verbatim.
std::shared_ptr<ScriptedBackend> make_rules_backend(
    std::string id, std::vector<std::pair<std::string, std::string>> contains_reply);

/// Always the same reply.
std::shared_ptr<ScriptedBackend> make_constant_backend(std::string id, std::string reply);

/// Replies with the question extracted from the prompt.
std::shared_ptr<ScriptedBackend> make_echo_question_backend(std::string id);

/// Replies with the most recent reply produced by `source` (test double for
/// a verifier that reproduces the candidate exactly). Single-run use only.
std::shared_ptr<ScriptedBackend> make_echo_of_backend(std::string id,
                                                      std::shared_ptr<ScriptedBackend> source);

/// Cites every shown document once: "Shown documents mention ... [1][2]..".
std::shared_ptr<ScriptedBackend> make_cite_all_backend(std::string id);

/// Extractive long-form behaviour: copies, verbatim, every shown-document
/// sentence containing a token word (^tok[a-z0-9]+$) and cites that document.
/// In correction mode the drafted statements are kept first. With
/// noise_prob > 0, generation (not correction) replies additionally inject
/// one fabricated, unsupported statement citing the first shown document;
/// the coin is a deterministic hash of (seed, question).
std::shared_ptr<ScriptedBackend> make_extractive_backend(std::string id, double noise_prob = 0.0,
                                                         uint64_t seed = 0);

}  // namespace calm
