#include "calm/lm.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include "calm/errors.hpp"
#include "calm/text.hpp"
#include "httplib.h"
#include "json.hpp"

namespace calm {
namespace {

struct ParsedUrl {
    std::string base;  // scheme://host[:port]
    std::string path;
};

ParsedUrl parse_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("invalid endpoint URL: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

uint64_t fnv1a(const std::string& s, uint64_t seed) {
    uint64_t h = 14695981039346656037ULL ^ seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<std::string> split_lines(const std::string& s) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : s) {
        if (c == '\n') {
            lines.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    lines.push_back(cur);
    return lines;
}

bool is_token_word(const std::string& w) {
    return w.size() > 3 && w.rfind("tok", 0) == 0;
}

std::vector<std::string> split_doc_sentences(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (size_t i = 0; i < s.size(); ++i) {
        cur.push_back(s[i]);
        if ((s[i] == '.' || s[i] == '?' || s[i] == '!') &&
            (i + 1 == s.size() || s[i + 1] == ' ')) {
            out.push_back(text::collapse_ws(cur));
            cur.clear();
        }
    }
    auto rest = text::collapse_ws(cur);
    if (!rest.empty()) out.push_back(rest);
    return out;
}

}  // namespace

HttpBackend::HttpBackend(std::string id, HttpBackendConfig config)
    : id_(std::move(id)), config_(std::move(config)) {}

LmResponse HttpBackend::complete(const LmRequest& request) {
    auto url = parse_url(config_.url);
    nlohmann::json body = {{"model", config_.model},
                           {"prompt", request.prompt},
                           {"max_tokens", request.max_tokens},
                           {"temperature", request.temperature},
                           {"stop", request.stop}};
    httplib::Headers headers;
    if (!config_.credential_env.empty()) {
        const char* token = std::getenv(config_.credential_env.c_str());
        if (token != nullptr && *token != '\0') {
            headers.emplace("Authorization", std::string("Bearer ") + token);
        }
    }

    auto start = std::chrono::steady_clock::now();
    std::string last_failure;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            auto delay = config_.backoff_base_ms * (1L << (attempt - 1));
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
        httplib::Client client(url.base);
        client.set_connection_timeout(config_.timeout_s, 0);
        client.set_read_timeout(config_.timeout_s, 0);
        auto result = client.Post(url.path, headers, body.dump(), "application/json");
        if (!result) {
            last_failure = "transport error: " + httplib::to_string(result.error());
            continue;
        }
        if (result->status >= 500) {
            last_failure = "status " + std::to_string(result->status) + ": " +
                           result->body.substr(0, 200);
            continue;
        }
        if (result->status < 200 || result->status >= 300) {
            throw BackendError(id_ + ": status " + std::to_string(result->status) + ": " +
                               result->body.substr(0, 200));
        }
        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(result->body);
        } catch (const nlohmann::json::parse_error& e) {
            throw BackendError(id_ + ": unparsable response body: " + std::string(e.what()));
        }
        if (!reply.contains("text")) throw BackendError(id_ + ": response missing 'text'");
        LmResponse response;
        response.text = reply.at("text").get<std::string>();
        response.prompt_tokens = text::tokenize(request.prompt).size();
        response.completion_tokens = text::tokenize(response.text).size();
        response.backend_id = id_;
        response.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  std::chrono::steady_clock::now() - start)
                                  .count();
        return response;
    }
    throw BackendError(id_ + ": retries exhausted; last failure: " + last_failure);
}

ScriptedBackend::ScriptedBackend(std::string id, std::vector<Rule> rules)
    : id_(std::move(id)), rules_(std::move(rules)) {
    if (rules_.empty()) throw ConfigError("scripted backend needs at least one rule");
}

LmResponse ScriptedBackend::complete(const LmRequest& request) {
    std::lock_guard<std::mutex> lock(mutex_);
    ++call_count_;
    for (const auto& rule : rules_) {
        if (rule.matches(request.prompt)) {
            LmResponse response;
            response.text = rule.reply(request.prompt);
            response.prompt_tokens = text::tokenize(request.prompt).size();
            response.completion_tokens = text::tokenize(response.text).size();
            response.backend_id = id_;
            last_reply_ = response.text;
            return response;
        }
    }
    throw ScriptError(id_ + ": no rule matches prompt (fixture bug)");
}

std::vector<ShownDoc> prompt_docs(const std::string& prompt) {
    auto lines = split_lines(prompt);
    // only the final query block counts; shots carry their own question lines
    size_t start = 0;
    for (size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].rfind("Question:", 0) == 0) start = i;
    }
    std::vector<ShownDoc> docs;
    for (size_t i = start; i < lines.size(); ++i) {
        const auto& line = lines[i];
        if (line.rfind("Document [", 0) != 0) continue;
        auto close = line.find(']');
        auto title_open = line.find("(Title: ", close);
        auto title_close = line.find("): ", title_open);
        if (close == std::string::npos || title_open == std::string::npos ||
            title_close == std::string::npos) {
            continue;
        }
        ShownDoc doc;
        doc.index = std::stoi(line.substr(10, close - 10));
        doc.title = line.substr(title_open + 8, title_close - title_open - 8);
        doc.text = line.substr(title_close + 3);
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::string prompt_question(const std::string& prompt) {
    std::string question;
    for (const auto& line : split_lines(prompt)) {
        if (line.rfind("Question:", 0) == 0) {
            question = text::collapse_ws(line.substr(9));
        }
    }
    return question;
}

std::optional<std::string> prompt_draft(const std::string& prompt) {
    static const std::string kHeader = "Drafted Solution:";
    auto pos = prompt.rfind(kHeader);
    if (pos == std::string::npos) return std::nullopt;
    auto end = prompt.find('\n', pos);
    auto content = prompt.substr(pos + kHeader.size(),
                                 end == std::string::npos ? std::string::npos
                                                          : end - pos - kHeader.size());
    return text::collapse_ws(content);
}

std::shared_ptr<ScriptedBackend> make_rules_backend(
    std::string id, std::vector<std::pair<std::string, std::string>> contains_reply) {
    std::vector<ScriptedBackend::Rule> rules;
    for (auto& [needle, reply] : contains_reply) {
        rules.push_back({[needle](const std::string& p) {
                             return needle.empty() || p.find(needle) != std::string::npos;
                         },
                         [reply](const std::string&) { return reply; }});
    }
    return std::make_shared<ScriptedBackend>(std::move(id), std::move(rules));
}

std::shared_ptr<ScriptedBackend> make_constant_backend(std::string id, std::string reply) {
    return make_rules_backend(std::move(id), {{"", std::move(reply)}});
}

std::shared_ptr<ScriptedBackend> make_echo_question_backend(std::string id) {
    std::vector<ScriptedBackend::Rule> rules;
    rules.push_back({[](const std::string&) { return true; },
                     [](const std::string& p) { return prompt_question(p); }});
    return std::make_shared<ScriptedBackend>(std::move(id), std::move(rules));
}

std::shared_ptr<ScriptedBackend> make_echo_of_backend(std::string id,
                                                      std::shared_ptr<ScriptedBackend> source) {
    std::vector<ScriptedBackend::Rule> rules;
    rules.push_back({[](const std::string&) { return true; },
                     [source](const std::string&) { return source->last_reply(); }});
    return std::make_shared<ScriptedBackend>(std::move(id), std::move(rules));
}

std::shared_ptr<ScriptedBackend> make_cite_all_backend(std::string id) {
    std::vector<ScriptedBackend::Rule> rules;
    rules.push_back({[](const std::string&) { return true; },
                     [](const std::string& p) {
                         GroundedAnswer a;
                         Statement st;
                         st.text = "The shown documents cover the requested topic.";
                         for (const auto& d : prompt_docs(p)) st.citations.push_back(d.index);
                         a.statements.push_back(std::move(st));
                         return render(a);
                     }});
    return std::make_shared<ScriptedBackend>(std::move(id), std::move(rules));
}

std::shared_ptr<ScriptedBackend> make_extractive_backend(std::string id, double noise_prob,
                                                         uint64_t seed) {
    std::vector<ScriptedBackend::Rule> rules;
    rules.push_back(
        {[](const std::string&) { return true; },
         [noise_prob, seed](const std::string& prompt) {
             auto docs = prompt_docs(prompt);
             auto draft = prompt_draft(prompt);
             GroundedAnswer answer;
             std::set<std::string> seen;
             if (draft && !draft->empty()) {
                 auto drafted = parse_long_form(*draft, std::nullopt);
                 for (auto& st : drafted.statements) {
                     seen.insert(text::normalize_for_match(st.text));
                     answer.statements.push_back(std::move(st));
                 }
             }
             for (const auto& doc : docs) {
                 for (const auto& sentence : split_doc_sentences(doc.text)) {
                     bool has_token = false;
                     for (const auto& w : text::tokenize(sentence)) {
                         if (is_token_word(w)) has_token = true;
                     }
                     if (!has_token) continue;
                     if (!seen.insert(text::normalize_for_match(sentence)).second) continue;
                     answer.statements.push_back({sentence, {doc.index}});
                 }
             }
             bool generation_mode = !draft.has_value();
             if (generation_mode && noise_prob > 0.0 && !docs.empty()) {
                 double coin = static_cast<double>(fnv1a(prompt_question(prompt), seed) >> 11) /
                               static_cast<double>(1ULL << 53);
                 if (coin < noise_prob) {
                     answer.statements.push_back(
                         {"The committee has also confirmed that the moon is a large wheel of "
                          "aged cheese orbiting quietly.",
                          {docs.front().index}});
                 }
             }
             if (answer.statements.empty()) return std::string("No supported answer found.");
             return render(answer);
         }});
    return std::make_shared<ScriptedBackend>(std::move(id), std::move(rules));
}

}  // namespace calm
