#pragma once

#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "calm/corpus.hpp"
#include "json.hpp"

namespace calm {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct PoolEntry {
    std::string pid;
    double score = 0.0;
};

/// Ranked retrieval results for one query, consumed batch-by-batch across
/// pipeline rounds. Owned by exactly one run; the cursor is the only mutable
/// part and never decreases.
class RankedPool {
public:
    RankedPool() = default;
    RankedPool(std::string query_id, std::vector<PoolEntry> entries);

    const std::string& query_id() const { return query_id_; }
    const std::vector<PoolEntry>& entries() const { return entries_; }
    size_t cursor() const { return cursor_; }
    bool exhausted() const { return cursor_ >= entries_.size(); }

    /// Serve up to `needed` passages at/after the cursor whose pid is not in
    /// `exclude`, in rank order. The cursor advances past every entry
    /// examined, so excluded entries are consumed rather than skipped; no
    /// passage is ever served twice. A short return signals exhaustion.
    std::vector<Passage> next_batch(const Corpus& corpus, size_t needed,
                                    const std::set<std::string>& exclude);

private:
    std::string query_id_;
    std::vector<PoolEntry> entries_;
    size_t cursor_ = 0;
};

/// Inverted index with Okapi BM25 scoring over tokenized title+text.
/// Immutable after construction.
class Bm25Index {
public:
    Bm25Index(const Corpus& corpus, Bm25Params params);

    size_t doc_count() const { return doc_pids_.size(); }
    double avg_doc_len() const { return avg_doc_len_; }
    size_t doc_len(size_t doc) const { return doc_lens_[doc]; }
    const Bm25Params& params() const { return params_; }
    const std::vector<std::string>& doc_pids() const { return doc_pids_; }

    /// Postings for a term as (doc ordinal, term frequency) pairs; empty if
    /// the term does not occur.
    const std::vector<std::pair<size_t, size_t>>& postings(const std::string& term) const;

    /// idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)); always positive.
    double idf(const std::string& term) const;

    /// BM25 score of every document for the query, in corpus order. Tokens
    /// contribute in query order (repeated tokens contribute repeatedly).
    std::vector<double> score_all(const std::string& query) const;

    nlohmann::json to_json() const;
    static Bm25Index from_json(const nlohmann::json& j);

private:
    Bm25Index() = default;

    Bm25Params params_;
    std::vector<std::string> doc_pids_;
    std::vector<size_t> doc_lens_;
    double avg_doc_len_ = 0.0;
    std::unordered_map<std::string, std::vector<std::pair<size_t, size_t>>> postings_;
};

/// Top-n passages by BM25 score, ties broken by pid ascending. Zero-scoring
/// documents participate; a query with no tokens yields an empty pool.
RankedPool retrieve(const Bm25Index& index, const std::string& query, size_t n,
                    const std::string& query_id = {});

/// Common retrieval contract so dense retrievers can be represented by a
/// precomputed ranking file behind the same interface.
class Retriever {
public:
    virtual ~Retriever() = default;
    virtual RankedPool pool_for(const std::string& query_id, const std::string& question,
                                size_t n) const = 0;
};

class Bm25Retriever : public Retriever {
public:
    explicit Bm25Retriever(std::shared_ptr<const Bm25Index> index) : index_(std::move(index)) {}
    RankedPool pool_for(const std::string& query_id, const std::string& question,
                        size_t n) const override;

private:
    std::shared_ptr<const Bm25Index> index_;
};

/// Serves rankings loaded from a line-delimited file of
/// {qid, ranking: [{pid, score}]} records.
class RankingFileRetriever : public Retriever {
public:
    explicit RankingFileRetriever(const std::string& path);
    RankedPool pool_for(const std::string& query_id, const std::string& question,
                        size_t n) const override;

private:
    std::unordered_map<std::string, std::vector<PoolEntry>> rankings_;
};

}  // namespace calm
