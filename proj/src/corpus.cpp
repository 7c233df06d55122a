#include "calm/corpus.hpp"

#include "calm/jsonl.hpp"

namespace calm {

void Corpus::add(Passage p) {
    if (p.pid.empty()) throw IntegrityError("passage with empty pid");
    if (p.text.empty()) throw IntegrityError("passage " + p.pid + " has empty text");
    if (by_pid_.count(p.pid)) throw IntegrityError("duplicate pid: " + p.pid);
    by_pid_[p.pid] = passages_.size();
    passages_.push_back(std::move(p));
}

const Passage& Corpus::by_pid(const std::string& pid) const {
    auto it = by_pid_.find(pid);
    if (it == by_pid_.end()) throw IntegrityError("unknown pid: " + pid);
    return passages_[it->second];
}

Corpus load_corpus(const std::string& path) {
    Corpus corpus;
    size_t lineno = 0;
    for (const auto& rec : read_jsonl(path)) {
        ++lineno;
        if (!rec.is_object() || !rec.contains("pid") || !rec.contains("text")) {
            throw ParseError(path + ": record " + std::to_string(lineno) +
                             " missing pid/text field");
        }
        Passage p;
        p.pid = rec.at("pid").get<std::string>();
        p.title = rec.value("title", std::string{});
        p.text = rec.at("text").get<std::string>();
        corpus.add(std::move(p));
    }
    return corpus;
}

}  // namespace calm
