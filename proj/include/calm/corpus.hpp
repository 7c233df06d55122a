#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "calm/errors.hpp"

namespace calm {

/// One retrievable passage of the trusted corpus (target length ~100 words).
struct Passage {
    std::string pid;
    std::string title;
    std::string text;
};

/// Immutable after construction; safely shareable across concurrent runs.
class Corpus {
public:
    void add(Passage p);

    size_t size() const { return passages_.size(); }
    bool empty() const { return passages_.empty(); }
    const std::vector<Passage>& passages() const { return passages_; }
    const Passage& at(size_t i) const { return passages_[i]; }

    bool contains(const std::string& pid) const { return by_pid_.count(pid) != 0; }
    const Passage& by_pid(const std::string& pid) const;

private:
    std::vector<Passage> passages_;
    std::unordered_map<std::string, size_t> by_pid_;
};

/// Load a line-delimited corpus file ({pid, title, text} per line).
/// Duplicate pids and empty text violate corpus invariants.
Corpus load_corpus(const std::string& path);

}  // namespace calm
