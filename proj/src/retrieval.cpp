#include "calm/retrieval.hpp"

#include <algorithm>
#include <cmath>

#include "calm/jsonl.hpp"
#include "calm/text.hpp"

namespace calm {

RankedPool::RankedPool(std::string query_id, std::vector<PoolEntry> entries)
    : query_id_(std::move(query_id)), entries_(std::move(entries)) {
    std::set<std::string> seen;
    for (const auto& e : entries_) {
        if (!seen.insert(e.pid).second) throw IntegrityError("duplicate pid in pool: " + e.pid);
    }
    for (size_t i = 1; i < entries_.size(); ++i) {
        const auto& a = entries_[i - 1];
        const auto& b = entries_[i];
        if (a.score < b.score || (a.score == b.score && a.pid > b.pid)) {
            throw IntegrityError("pool entries not sorted (score desc, pid asc)");
        }
    }
}

std::vector<Passage> RankedPool::next_batch(const Corpus& corpus, size_t needed,
                                            const std::set<std::string>& exclude) {
    std::vector<Passage> out;
    while (out.size() < needed && cursor_ < entries_.size()) {
        const auto& entry = entries_[cursor_++];
        if (exclude.count(entry.pid)) continue;
        out.push_back(corpus.by_pid(entry.pid));
    }
    return out;
}

Bm25Index::Bm25Index(const Corpus& corpus, Bm25Params params) : params_(params) {
    if (corpus.empty()) throw IntegrityError("cannot index an empty corpus");
    size_t total_len = 0;
    for (const auto& p : corpus.passages()) {
        size_t doc = doc_pids_.size();
        doc_pids_.push_back(p.pid);
        auto tokens = text::tokenize(p.title + " " + p.text);
        doc_lens_.push_back(tokens.size());
        total_len += tokens.size();
        std::unordered_map<std::string, size_t> tf;
        for (const auto& t : tokens) ++tf[t];
        for (const auto& [term, freq] : tf) postings_[term].emplace_back(doc, freq);
    }
    avg_doc_len_ = static_cast<double>(total_len) / static_cast<double>(doc_pids_.size());
}

const std::vector<std::pair<size_t, size_t>>& Bm25Index::postings(const std::string& term) const {
    static const std::vector<std::pair<size_t, size_t>> kEmpty;
    auto it = postings_.find(term);
    return it == postings_.end() ? kEmpty : it->second;
}

double Bm25Index::idf(const std::string& term) const {
    double n = static_cast<double>(doc_count());
    double df = static_cast<double>(postings(term).size());
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::vector<double> Bm25Index::score_all(const std::string& query) const {
    std::vector<double> scores(doc_count(), 0.0);
    for (const auto& term : text::tokenize(query)) {
        double w = idf(term);
        for (const auto& [doc, tf] : postings(term)) {
            double f = static_cast<double>(tf);
            double norm = static_cast<double>(doc_lens_[doc]) / avg_doc_len_;
            scores[doc] += w * f * (params_.k1 + 1.0) /
                           (f + params_.k1 * (1.0 - params_.b + params_.b * norm));
        }
    }
    return scores;
}

nlohmann::json Bm25Index::to_json() const {
    nlohmann::json postings = nlohmann::json::object();
    for (const auto& [term, list] : postings_) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& [doc, tf] : list) arr.push_back({doc, tf});
        postings[term] = std::move(arr);
    }
    return {{"k1", params_.k1},
            {"b", params_.b},
            {"doc_pids", doc_pids_},
            {"doc_lens", doc_lens_},
            {"avg_doc_len", avg_doc_len_},
            {"postings", std::move(postings)}};
}

Bm25Index Bm25Index::from_json(const nlohmann::json& j) {
    Bm25Index idx;
    idx.params_.k1 = j.at("k1").get<double>();
    idx.params_.b = j.at("b").get<double>();
    idx.doc_pids_ = j.at("doc_pids").get<std::vector<std::string>>();
    idx.doc_lens_ = j.at("doc_lens").get<std::vector<size_t>>();
    idx.avg_doc_len_ = j.at("avg_doc_len").get<double>();
    for (const auto& [term, arr] : j.at("postings").items()) {
        auto& list = idx.postings_[term];
        for (const auto& pair : arr) {
            list.emplace_back(pair.at(0).get<size_t>(), pair.at(1).get<size_t>());
        }
    }
    return idx;
}

RankedPool retrieve(const Bm25Index& index, const std::string& query, size_t n,
                    const std::string& query_id) {
    if (n < 1) throw IntegrityError("retrieve requires n >= 1");
    if (text::tokenize(query).empty()) return RankedPool(query_id, {});
    auto scores = index.score_all(query);
    std::vector<PoolEntry> entries;
    entries.reserve(scores.size());
    for (size_t doc = 0; doc < scores.size(); ++doc) {
        entries.push_back({index.doc_pids()[doc], scores[doc]});
    }
    std::sort(entries.begin(), entries.end(), [](const PoolEntry& a, const PoolEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.pid < b.pid;
    });
    if (entries.size() > n) entries.resize(n);
    return RankedPool(query_id, std::move(entries));
}

RankedPool Bm25Retriever::pool_for(const std::string& query_id, const std::string& question,
                                   size_t n) const {
    return retrieve(*index_, question, n, query_id);
}

RankingFileRetriever::RankingFileRetriever(const std::string& path) {
    for (const auto& rec : read_jsonl(path)) {
        auto qid = rec.at("qid").get<std::string>();
        std::vector<PoolEntry> entries;
        for (const auto& e : rec.at("ranking")) {
            entries.push_back({e.at("pid").get<std::string>(), e.value("score", 0.0)});
        }
        // Enforce the pool invariant regardless of file order.
        std::stable_sort(entries.begin(), entries.end(),
                         [](const PoolEntry& a, const PoolEntry& b) {
                             if (a.score != b.score) return a.score > b.score;
                             return a.pid < b.pid;
                         });
        rankings_[qid] = std::move(entries);
    }
}

RankedPool RankingFileRetriever::pool_for(const std::string& query_id, const std::string&,
                                          size_t n) const {
    auto it = rankings_.find(query_id);
    if (it == rankings_.end()) throw IntegrityError("no ranking for qid: " + query_id);
    auto entries = it->second;
    if (entries.size() > n) entries.resize(n);
    return RankedPool(query_id, std::move(entries));
}

}  // namespace calm
