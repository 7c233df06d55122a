#include "calm/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "calm/errors.hpp"
#include "calm/jsonl.hpp"
#include "calm/text.hpp"
#include "httplib.h"

namespace calm {
namespace {

std::string cited_text(const Corpus& corpus, const std::map<int, std::string>& display_map,
                       const std::vector<int>& citations) {
    std::string premise;
    for (int c : citations) {
        auto it = display_map.find(c);
        if (it == display_map.end()) {
            throw IntegrityError("citation [" + std::to_string(c) +
                                 "] is not in the display map");
        }
        if (!premise.empty()) premise += " ";
        premise += corpus.by_pid(it->second).text;
    }
    return premise;
}

std::string answer_plain_text(const GroundedAnswer& answer) {
    return text::strip_citation_markers(render(answer));
}

std::optional<double> mean_of(const std::vector<std::optional<double>>& values) {
    double sum = 0.0;
    size_t n = 0;
    for (const auto& v : values) {
        if (v) {
            sum += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

std::optional<double> style_average(const QueryMetrics& m, TaskStyle style) {
    switch (style) {
        case TaskStyle::asqa_long_form:
            // fluency is not computed here, so this is a partial average
            return mean_of({m.em_recall, m.citation_recall, m.citation_precision});
        case TaskStyle::qampari_entity_list:
            return mean_of({m.entity_precision, m.entity_recall5, m.citation_recall,
                            m.citation_precision});
        case TaskStyle::eli5_long_form:
            return mean_of({m.claim_recall, m.citation_recall, m.citation_precision});
    }
    return std::nullopt;
}

std::string cell(const std::optional<double>& v) {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", *v);
    return buf;
}

}  // namespace

std::map<std::string, GoldRecord> load_gold(const std::string& path, TaskStyle style) {
    std::map<std::string, GoldRecord> gold;
    for (const auto& rec : read_jsonl(path)) {
        GoldRecord g;
        g.qid = rec.at("qid").get<std::string>();
        g.style = style;
        if (rec.contains("short_answers")) {
            g.short_answer_sets =
                rec.at("short_answers").get<std::vector<std::vector<std::string>>>();
        }
        if (rec.contains("entities")) {
            g.gold_entities = rec.at("entities").get<std::vector<std::string>>();
        }
        if (rec.contains("subclaims")) {
            g.subclaims = rec.at("subclaims").get<std::vector<std::string>>();
        }
        gold[g.qid] = std::move(g);
    }
    return gold;
}

bool SubstringJudge::judge(const std::string& premise, const std::string& hypothesis) const {
    auto h = text::normalize_for_match(hypothesis);
    if (h.empty()) return true;
    return text::normalize_for_match(premise).find(h) != std::string::npos;
}

HttpJudge::HttpJudge(std::string url, int timeout_s)
    : url_(std::move(url)), timeout_s_(timeout_s) {}

bool HttpJudge::judge(const std::string& premise, const std::string& hypothesis) const {
    auto scheme_end = url_.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("invalid judge URL: " + url_);
    auto path_start = url_.find('/', scheme_end + 3);
    std::string base = path_start == std::string::npos ? url_ : url_.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : url_.substr(path_start);

    httplib::Client client(base);
    client.set_connection_timeout(timeout_s_, 0);
    client.set_read_timeout(timeout_s_, 0);
    nlohmann::json body = {{"premise", premise}, {"hypothesis", hypothesis}};
    auto result = client.Post(path, body.dump(), "application/json");
    if (!result) {
        throw EvaluationError("judge transport error: " + httplib::to_string(result.error()));
    }
    if (result->status < 200 || result->status >= 300) {
        throw EvaluationError("judge status " + std::to_string(result->status) + ": " +
                              result->body.substr(0, 200));
    }
    try {
        return nlohmann::json::parse(result->body).at("entailed").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw EvaluationError(std::string("unparsable judge response: ") + e.what());
    }
}

double em_recall(const std::string& answer_text,
                 const std::vector<std::vector<std::string>>& short_answer_sets) {
    if (short_answer_sets.empty()) throw EvaluationError("em_recall needs a non-empty gold set");
    auto haystack = text::normalize_for_match(answer_text);
    size_t hit = 0;
    for (const auto& forms : short_answer_sets) {
        for (const auto& form : forms) {
            auto needle = text::normalize_for_match(form);
            if (!needle.empty() && haystack.find(needle) != std::string::npos) {
                ++hit;
                break;
            }
        }
    }
    return static_cast<double>(hit) / static_cast<double>(short_answer_sets.size());
}

std::pair<double, double> entity_precision_recall5(const std::vector<std::string>& pred,
                                                   const std::vector<std::string>& gold) {
    std::vector<std::string> uniq;
    std::set<std::string> seen;
    for (const auto& p : pred) {
        auto n = text::normalize_for_match(p);
        if (!n.empty() && seen.insert(n).second) uniq.push_back(std::move(n));
    }
    std::set<std::string> gold_norm;
    for (const auto& g : gold) gold_norm.insert(text::normalize_for_match(g));

    size_t matches = 0;
    for (const auto& p : uniq) matches += gold_norm.count(p);

    double precision =
        uniq.empty() ? 0.0 : static_cast<double>(matches) / static_cast<double>(uniq.size());
    size_t cap = std::min<size_t>(5, gold_norm.size());
    double recall5 =
        cap == 0 ? 0.0 : std::min(1.0, static_cast<double>(matches) / static_cast<double>(cap));
    return {precision, recall5};
}

double claim_recall(const std::string& answer_text, const std::vector<std::string>& subclaims,
                    const EntailmentJudge& judge) {
    if (subclaims.empty()) throw EvaluationError("claim_recall needs non-empty subclaims");
    size_t hit = 0;
    for (const auto& claim : subclaims) {
        if (judge.judge(answer_text, claim)) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(subclaims.size());
}

double citation_recall(const GroundedAnswer& answer, const Corpus& corpus,
                       const std::map<int, std::string>& display_map,
                       const EntailmentJudge& judge) {
    if (answer.statements.empty()) return 0.0;
    size_t supported = 0;
    for (const auto& st : answer.statements) {
        if (st.citations.empty()) continue;
        if (judge.judge(cited_text(corpus, display_map, st.citations), st.text)) ++supported;
    }
    return static_cast<double>(supported) / static_cast<double>(answer.statements.size());
}

double citation_precision(const GroundedAnswer& answer, const Corpus& corpus,
                          const std::map<int, std::string>& display_map,
                          const EntailmentJudge& judge) {
    size_t total = 0;
    size_t relevant = 0;
    for (const auto& st : answer.statements) {
        if (st.citations.empty()) continue;
        bool full = judge.judge(cited_text(corpus, display_map, st.citations), st.text);
        for (size_t i = 0; i < st.citations.size(); ++i) {
            ++total;
            if (judge.judge(cited_text(corpus, display_map, {st.citations[i]}), st.text)) {
                ++relevant;
                continue;
            }
            std::vector<int> rest;
            for (size_t j = 0; j < st.citations.size(); ++j) {
                if (j != i) rest.push_back(st.citations[j]);
            }
            bool without =
                !rest.empty() && judge.judge(cited_text(corpus, display_map, rest), st.text);
            if (without != full) ++relevant;  // removal changes collective support
        }
    }
    if (total == 0) return 0.0;
    return static_cast<double>(relevant) / static_cast<double>(total);
}

QueryMetrics evaluate_run(const RunResult& run, const GoldRecord& gold, const Corpus& corpus,
                          const EntailmentJudge& judge) {
    QueryMetrics m;
    m.qid = run.qid;
    if (run.failed) {
        m.failed = true;
        return m;
    }
    switch (gold.style) {
        case TaskStyle::asqa_long_form:
            m.em_recall = em_recall(answer_plain_text(run.final_answer), gold.short_answer_sets);
            break;
        case TaskStyle::qampari_entity_list: {
            std::vector<std::string> pred;
            for (const auto& st : run.final_answer.statements) pred.push_back(st.text);
            auto [p, r5] = entity_precision_recall5(pred, gold.gold_entities);
            m.entity_precision = p;
            m.entity_recall5 = r5;
            break;
        }
        case TaskStyle::eli5_long_form:
            m.claim_recall =
                claim_recall(answer_plain_text(run.final_answer), gold.subclaims, judge);
            break;
    }
    m.citation_recall = citation_recall(run.final_answer, corpus, run.display_map, judge);
    m.citation_precision = citation_precision(run.final_answer, corpus, run.display_map, judge);
    m.average = style_average(m, gold.style);
    return m;
}

MetricsReport aggregate(std::vector<QueryMetrics> rows, TaskStyle style) {
    MetricsReport report;
    report.style = style;
    report.query_count = rows.size();
    report.empty = rows.empty();
    report.rows = std::move(rows);
    if (report.empty) return report;

    auto mean_field = [&](std::optional<double> QueryMetrics::*field) {
        std::vector<std::optional<double>> values;
        for (const auto& r : report.rows) values.push_back(r.*field);
        return mean_of(values);
    };
    report.means.em_recall = mean_field(&QueryMetrics::em_recall);
    report.means.entity_precision = mean_field(&QueryMetrics::entity_precision);
    report.means.entity_recall5 = mean_field(&QueryMetrics::entity_recall5);
    report.means.claim_recall = mean_field(&QueryMetrics::claim_recall);
    report.means.citation_recall = mean_field(&QueryMetrics::citation_recall);
    report.means.citation_precision = mean_field(&QueryMetrics::citation_precision);
    report.means.average = mean_field(&QueryMetrics::average);
    for (const auto& r : report.rows) {
        if (r.failed) report.means.failed = true;
    }
    return report;
}

namespace {

nlohmann::json metrics_to_json(const QueryMetrics& m) {
    nlohmann::json j = {{"qid", m.qid}, {"failed", m.failed}};
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) j[key] = *v;
    };
    put("em_recall", m.em_recall);
    put("entity_precision", m.entity_precision);
    put("entity_recall5", m.entity_recall5);
    put("claim_recall", m.claim_recall);
    put("citation_recall", m.citation_recall);
    put("citation_precision", m.citation_precision);
    put("average", m.average);
    return j;
}

}  // namespace

nlohmann::json report_to_json(const MetricsReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows) rows.push_back(metrics_to_json(r));
    return {{"style", to_string(report.style)},
            {"query_count", report.query_count},
            {"empty", report.empty},
            {"means", metrics_to_json(report.means)},
            {"rows", std::move(rows)}};
}

std::string render_report(const MetricsReport& report) {
    std::ostringstream out;
    out << "style: " << to_string(report.style) << "  queries: " << report.query_count << "\n";
    if (report.empty) {
        out << "(no rows)\n";
        return out.str();
    }
    out << "qid\tem\tent_p\trec5\tclaim\tcit_r\tcit_p\tavg\n";
    auto line = [&](const QueryMetrics& m, const std::string& label) {
        out << label << "\t" << cell(m.em_recall) << "\t" << cell(m.entity_precision) << "\t"
            << cell(m.entity_recall5) << "\t" << cell(m.claim_recall) << "\t"
            << cell(m.citation_recall) << "\t" << cell(m.citation_precision) << "\t"
            << cell(m.average) << (m.failed ? "\t(failed)" : "") << "\n";
    };
    for (const auto& r : report.rows) line(r, r.qid);
    line(report.means, "mean");
    return out.str();
}

}  // namespace calm
