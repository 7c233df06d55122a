#include "calm/sensitivity.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <random>
#include <set>
#include <thread>

#include "calm/errors.hpp"
#include "calm/text.hpp"

namespace calm {
namespace {

struct QueryCandidates {
    // answer docs in greedy-coverage order; recall_by_count[j] is the recall
    // of the first j of them
    std::vector<size_t> answer_docs;
    std::vector<double> recall_by_count;
    std::vector<size_t> distractors;
    size_t min_answer_docs = 0;  // smallest j that still allows a full 5-doc set
};

std::set<size_t> gold_hits(const Passage& passage,
                           const std::vector<std::vector<std::string>>& short_answer_sets) {
    auto haystack = text::normalize_for_match(passage.text);
    std::set<size_t> hits;
    for (size_t g = 0; g < short_answer_sets.size(); ++g) {
        for (const auto& form : short_answer_sets[g]) {
            auto needle = text::normalize_for_match(form);
            if (!needle.empty() && haystack.find(needle) != std::string::npos) {
                hits.insert(g);
                break;
            }
        }
    }
    return hits;
}

QueryCandidates candidates_for(const Corpus& corpus, const GoldRecord& gold,
                               std::mt19937_64& rng) {
    QueryCandidates c;
    std::vector<std::pair<size_t, std::set<size_t>>> bearing;
    for (size_t i = 0; i < corpus.size(); ++i) {
        auto hits = gold_hits(corpus.at(i), gold.short_answer_sets);
        if (hits.empty()) {
            c.distractors.push_back(i);
        } else {
            bearing.emplace_back(i, std::move(hits));
        }
    }
    std::shuffle(bearing.begin(), bearing.end(), rng);
    std::shuffle(c.distractors.begin(), c.distractors.end(), rng);

    // order answer docs by marginal gold coverage so that recall_by_count is
    // the best achievable for each count
    std::set<size_t> covered;
    c.recall_by_count.push_back(0.0);
    std::vector<bool> used(bearing.size(), false);
    size_t limit = std::min<size_t>(5, bearing.size());
    for (size_t step = 0; step < limit; ++step) {
        size_t best = bearing.size();
        size_t best_gain = 0;
        for (size_t i = 0; i < bearing.size(); ++i) {
            if (used[i]) continue;
            size_t gain = 0;
            for (size_t g : bearing[i].second) gain += covered.count(g) == 0;
            if (best == bearing.size() || gain > best_gain) {
                best = i;
                best_gain = gain;
            }
        }
        used[best] = true;
        c.answer_docs.push_back(bearing[best].first);
        for (size_t g : bearing[best].second) covered.insert(g);
        c.recall_by_count.push_back(static_cast<double>(covered.size()) /
                                    static_cast<double>(gold.short_answer_sets.size()));
    }
    c.min_answer_docs = c.distractors.size() >= 5 ? 0 : 5 - c.distractors.size();
    if (c.min_answer_docs > c.answer_docs.size()) {
        throw ConstructionError("corpus too small to form 5-document sets");
    }
    return c;
}

}  // namespace

std::string to_string(AnchorLabel label) {
    switch (label) {
        case AnchorLabel::low: return "low";
        case AnchorLabel::med: return "med";
        case AnchorLabel::high: return "high";
    }
    return "low";
}

std::optional<double> relative_improvement(double p_from, double p_to) {
    if (p_from <= 0.0) return std::nullopt;
    return (p_to - p_from) / p_from;
}

namespace {

// Re-read a value through its shortest round-trip decimal form at extended
// precision.  Accuracies are decimal quantities; differencing them directly in
// binary leaves representation noise in the low bits (0.3 - 0.2 != 0.2 - 0.1),
// which would make ratios of equal decimal gaps land a few ulps off.
long double as_decimal(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    *end = '\0';
    return std::strtold(buf, nullptr);
}

}  // namespace

std::optional<double> second_order_gain(double p_low, double p_med, double p_high) {
    if (p_med <= p_low) return std::nullopt;
    long double num = as_decimal(p_high) - as_decimal(p_med);
    long double den = as_decimal(p_med) - as_decimal(p_low);
    return static_cast<double>(num / den);
}

double doc_set_recall(const Corpus& corpus, const std::vector<std::string>& pids,
                      const std::vector<std::vector<std::string>>& short_answer_sets) {
    if (short_answer_sets.empty()) return 0.0;
    std::set<size_t> covered;
    for (const auto& pid : pids) {
        for (size_t g : gold_hits(corpus.by_pid(pid), short_answer_sets)) covered.insert(g);
    }
    return static_cast<double>(covered.size()) /
           static_cast<double>(short_answer_sets.size());
}

std::vector<AnchorPoint> build_anchor_sets(const Corpus& corpus,
                                           const std::vector<QueryRecord>& queries,
                                           const std::map<std::string, GoldRecord>& gold,
                                           const std::vector<double>& targets, uint64_t seed) {
    if (queries.empty()) throw ConstructionError("no queries to build anchor sets for");
    static const AnchorLabel kLabels[] = {AnchorLabel::low, AnchorLabel::med, AnchorLabel::high};

    std::vector<AnchorPoint> anchors;
    for (size_t a = 0; a < targets.size(); ++a) {
        double target = targets[a];
        AnchorPoint anchor;
        anchor.label = kLabels[std::min<size_t>(a, 2)];
        anchor.target_recall = target;

        double acc = 0.0;
        double min_sum = 0.0;
        double max_sum = 0.0;
        for (size_t q = 0; q < queries.size(); ++q) {
            auto it = gold.find(queries[q].qid);
            if (it == gold.end()) {
                throw ConstructionError("no gold record for qid " + queries[q].qid);
            }
            std::mt19937_64 rng(seed * 1000003ULL + a * 769ULL + q);
            auto cand = candidates_for(corpus, it->second, rng);

            size_t max_j = cand.answer_docs.size();
            min_sum += cand.recall_by_count[cand.min_answer_docs];
            max_sum += cand.recall_by_count[max_j];

            // pick the answer-doc count keeping the running mean on target
            size_t best_j = cand.min_answer_docs;
            double best_err = 1e18;
            for (size_t j = cand.min_answer_docs; j <= max_j; ++j) {
                double err = std::abs(acc + cand.recall_by_count[j] -
                                      target * static_cast<double>(q + 1));
                if (err < best_err) {
                    best_err = err;
                    best_j = j;
                }
            }
            acc += cand.recall_by_count[best_j];

            std::vector<std::string> pids;
            for (size_t j = 0; j < best_j; ++j) pids.push_back(corpus.at(cand.answer_docs[j]).pid);
            for (size_t d = 0; pids.size() < 5; ++d) {
                pids.push_back(corpus.at(cand.distractors[d]).pid);
            }
            anchor.doc_sets.push_back(std::move(pids));
        }

        double measured = 0.0;
        for (size_t q = 0; q < queries.size(); ++q) {
            measured += doc_set_recall(corpus, anchor.doc_sets[q],
                                       gold.at(queries[q].qid).short_answer_sets);
        }
        measured /= static_cast<double>(queries.size());
        anchor.measured_recall = measured;
        if (std::abs(measured - target) > 0.05) {
            double lo = min_sum / static_cast<double>(queries.size());
            double hi = max_sum / static_cast<double>(queries.size());
            char buf[128];
            std::snprintf(buf, sizeof(buf),
                          "target recall %.3f unreachable; achievable range [%.3f, %.3f]",
                          target, lo, hi);
            throw ConstructionError(buf);
        }
        anchors.push_back(std::move(anchor));
    }
    return anchors;
}

SensitivityReport run_sensitivity(LmBackend& backend, const std::vector<AnchorPoint>& anchors,
                                  const std::vector<QueryRecord>& queries,
                                  const std::map<std::string, GoldRecord>& gold,
                                  const Corpus& corpus, const PromptTemplate& generate_template,
                                  size_t jobs) {
    if (anchors.size() != 3) throw ConfigError("sensitivity needs exactly 3 anchor points");

    SensitivityReport report;
    double accuracies[3] = {0, 0, 0};
    for (size_t a = 0; a < 3; ++a) {
        const auto& anchor = anchors[a];
        if (anchor.doc_sets.size() != queries.size()) {
            throw ConfigError("anchor doc sets are not aligned with the query list");
        }
        std::vector<double> scores(queries.size(), 0.0);
        std::vector<char> ok(queries.size(), 0);
        std::atomic<size_t> next{0};
        auto worker = [&] {
            while (true) {
                size_t q = next.fetch_add(1);
                if (q >= queries.size()) return;
                try {
                    std::vector<std::pair<int, Passage>> docs;
                    for (const auto& pid : anchor.doc_sets[q]) {
                        docs.emplace_back(static_cast<int>(docs.size() + 1), corpus.by_pid(pid));
                    }
                    LmRequest request;
                    request.prompt =
                        render_generation_prompt(generate_template, queries[q].question, docs);
                    auto response = backend.complete(request);
                    scores[q] = em_recall(text::strip_citation_markers(response.text),
                                          gold.at(queries[q].qid).short_answer_sets);
                    ok[q] = 1;
                } catch (const std::exception&) {
                    ok[q] = 0;
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
        double sum = 0.0;
        size_t n = 0;
        for (size_t q = 0; q < queries.size(); ++q) {
            if (ok[q]) {
                sum += scores[q];
                ++n;
            } else {
                report.partial = true;
            }
        }
        accuracies[a] = n == 0 ? 0.0 : sum / static_cast<double>(n);
        report.measured_recalls.push_back(anchor.measured_recall);
    }
    report.p_low = accuracies[0];
    report.p_med = accuracies[1];
    report.p_high = accuracies[2];
    report.rel_improvement_low_to_med = relative_improvement(report.p_low, report.p_med);
    report.rel_improvement_med_to_high = relative_improvement(report.p_med, report.p_high);
    report.second_order_ratio = second_order_gain(report.p_low, report.p_med, report.p_high);
    return report;
}

nlohmann::json sensitivity_report_to_json(const SensitivityReport& report) {
    nlohmann::json j = {{"p_low", report.p_low},
                        {"p_med", report.p_med},
                        {"p_high", report.p_high},
                        {"partial", report.partial},
                        {"measured_recalls", report.measured_recalls}};
    if (report.rel_improvement_low_to_med) {
        j["rel_improvement_low_to_med"] = *report.rel_improvement_low_to_med;
    }
    if (report.rel_improvement_med_to_high) {
        j["rel_improvement_med_to_high"] = *report.rel_improvement_med_to_high;
    }
    if (report.second_order_ratio) {
        j["second_order_ratio"] = *report.second_order_ratio;
    } else {
        j["second_order_ratio_undefined"] = true;
    }
    return j;
}

}  // namespace calm
