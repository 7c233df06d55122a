#include "calm/consistency.hpp"

#include <cmath>
#include <map>
#include <random>

#include "calm/errors.hpp"
#include "doctest.h"

using namespace calm;

namespace {

// brute-force bigram multiset scorer, independent of the library internals
Rouge2Score oracle_rouge2(const std::vector<std::string>& cand,
                          const std::vector<std::string>& ref) {
    auto bigrams = [](const std::vector<std::string>& t) {
        std::map<std::pair<std::string, std::string>, int> out;
        for (size_t i = 0; i + 1 < t.size(); ++i) ++out[{t[i], t[i + 1]}];
        return out;
    };
    auto cb = bigrams(cand);
    auto rb = bigrams(ref);
    size_t overlap = 0, ct = 0, rt = 0;
    for (const auto& [k, n] : cb) {
        ct += n;
        auto it = rb.find(k);
        if (it != rb.end()) overlap += std::min(n, it->second);
    }
    for (const auto& [k, n] : rb) rt += n;
    Rouge2Score s;
    s.precision = ct ? static_cast<double>(overlap) / ct : 0.0;
    s.recall = rt ? static_cast<double>(overlap) / rt : 0.0;
    s.f1 = (s.precision + s.recall) > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall)
                                        : 0.0;
    return s;
}

std::string join(const std::vector<std::string>& t) {
    std::string s;
    for (const auto& w : t) {
        if (!s.empty()) s += " ";
        s += w;
    }
    return s;
}

GroundedAnswer one_statement(const std::string& text, std::vector<int> cites = {}) {
    GroundedAnswer a;
    a.statements.push_back({text, std::move(cites)});
    return a;
}

}  // namespace

TEST_CASE("rouge2 hand-checked values") {
    auto s = rouge2("a b c d", "a b c d");
    CHECK(s.f1 == doctest::Approx(1.0));
    s = rouge2("a b c", "b c d");
    // bigrams: {ab, bc} vs {bc, cd}; overlap 1
    CHECK(s.precision == doctest::Approx(0.5));
    CHECK(s.recall == doctest::Approx(0.5));
    CHECK(s.f1 == doctest::Approx(0.5));
    CHECK(rouge2("a", "a").f1 == 0.0);  // under two tokens, zero bigrams
    CHECK(rouge2("", "a b").f1 == 0.0);
}

TEST_CASE("citation markers never influence the score") {
    auto with = rouge2("The song charted [1][4].", "The song charted [7].");
    auto without = rouge2("The song charted.", "The song charted.");
    CHECK(with.f1 == doctest::Approx(without.f1));
    CHECK(with.f1 == doctest::Approx(1.0));
}

TEST_CASE("rouge2 equals the oracle on 1000 random pairs") {
    std::mt19937_64 rng(99);
    std::vector<std::string> vocab = {"a", "b", "c", "d", "e", "f", "g"};
    for (int i = 0; i < 1000; ++i) {
        std::vector<std::string> cand, ref;
        size_t cl = rng() % 31, rl = rng() % 31;
        for (size_t w = 0; w < cl; ++w) cand.push_back(vocab[rng() % vocab.size()]);
        for (size_t w = 0; w < rl; ++w) ref.push_back(vocab[rng() % vocab.size()]);
        auto got = rouge2(join(cand), join(ref));
        auto want = oracle_rouge2(cand, ref);
        CHECK(std::abs(got.precision - want.precision) < 1e-12);
        CHECK(std::abs(got.recall - want.recall) < 1e-12);
        CHECK(std::abs(got.f1 - want.f1) < 1e-12);
    }
}

TEST_CASE("statement_match_score falls back to unigrams for short texts") {
    CHECK(statement_match_score("Saturn", "Saturn") == doctest::Approx(1.0));
    CHECK(statement_match_score("Saturn", "Jupiter") == doctest::Approx(0.0));
    CHECK(statement_match_score("Saturn [1]", "Saturn [2]") == doctest::Approx(1.0));
}

TEST_CASE("is_consistent gates on the threshold and validates it") {
    auto cand = one_statement("The song charted in 1990.");
    auto same = one_statement("The song charted in 1990.");
    auto decision = is_consistent(same, cand, 0.9);
    CHECK(decision.accepted);
    CHECK(decision.score.f1 == doctest::Approx(1.0));

    auto other = one_statement("Entirely different words appear here.");
    CHECK_FALSE(is_consistent(other, cand, 0.5).accepted);
    CHECK(is_consistent(other, cand, 0.0).accepted);  // f1 0 >= 0

    CHECK_THROWS_AS(is_consistent(same, cand, 1.5), IntegrityError);
    CHECK_THROWS_AS(is_consistent(same, cand, -0.1), IntegrityError);
}

TEST_CASE("intersect keeps corroborated statements with citations") {
    GroundedAnswer cand;
    cand.statements.push_back({"Pam Tillis recorded the song in 1990.", {1, 4}});
    cand.statements.push_back({"The moon is made of aged cheese.", {2}});
    GroundedAnswer verifier;
    verifier.statements.push_back({"Pam Tillis recorded the song in 1990.", {1}});
    verifier.statements.push_back({"The single charted the next year.", {4}});

    auto result = intersect(cand, verifier, 0.5);
    REQUIRE(result.retained.statements.size() == 1);
    CHECK(result.retained_indices == std::vector<size_t>{0});
    CHECK(result.retained_citations == std::vector<int>{1, 4});
    CHECK(result.retained.raw_text == render(result.retained));
}

TEST_CASE("intersect against an empty verifier retains nothing") {
    auto cand = one_statement("Anything.", {1});
    GroundedAnswer verifier;
    auto result = intersect(cand, verifier, 0.0);
    CHECK(result.retained.statements.empty());
    CHECK(result.retained_citations.empty());
}
