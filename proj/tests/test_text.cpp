#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sumstyle/text.hpp"

using namespace sumstyle;

namespace {

Sentence S(std::vector<Token> tokens) { return make_sentence(std::move(tokens)); }

std::vector<Token> rand_tokens(std::mt19937_64& rng, int max_len, int alphabet) {
    std::uniform_int_distribution<int> len_d(0, max_len);
    std::uniform_int_distribution<int> tok_d(0, alphabet - 1);
    std::vector<Token> out;
    int len = len_d(rng);
    for (int i = 0; i < len; ++i) {
        out.push_back(std::string(1, static_cast<char>('a' + tok_d(rng))));
    }
    return out;
}

}  // namespace

TEST_CASE("tokenize lowercases and splits punctuation") {
    CHECK(tokenize("Hello, world.") ==
          std::vector<Token>{"hello", ",", "world", "."});
    CHECK(tokenize("") == std::vector<Token>{});
    CHECK(tokenize("   \t\n ") == std::vector<Token>{});
    CHECK(tokenize("A") == std::vector<Token>{"a"});
    CHECK(tokenize("one two  three") == std::vector<Token>{"one", "two", "three"});
}

TEST_CASE("tokenize keeps interior punctuation attached") {
    CHECK(tokenize("don't stop") == std::vector<Token>{"don't", "stop"});
    CHECK(tokenize("state-of-the-art") == std::vector<Token>{"state-of-the-art"});
    CHECK(tokenize("3.5 points") == std::vector<Token>{"3.5", "points"});
}

TEST_CASE("tokenize strips stacked edge punctuation as separate tokens") {
    CHECK(tokenize("\"Quote!\"") == std::vector<Token>{"\"", "quote", "!", "\""});
    CHECK(tokenize("(really?)") == std::vector<Token>{"(", "really", "?", ")"});
    CHECK(tokenize("...") == std::vector<Token>{".", ".", "."});
}

TEST_CASE("split_sentences splits on terminators followed by capitals") {
    auto s = split_sentences("First one. Second one! Third?");
    REQUIRE(s.size() == 3);
    CHECK(s[0].tokens == tokenize("First one."));
    CHECK(s[1].tokens == tokenize("Second one!"));
    CHECK(s[2].tokens == tokenize("Third?"));
    CHECK(s[0].index == 1);
    CHECK(s[1].index == 2);
    CHECK(s[2].index == 3);
}

TEST_CASE("split_sentences respects abbreviations and lowercase continuations") {
    auto s = split_sentences("Mr. Smith went home. He slept.");
    REQUIRE(s.size() == 2);
    CHECK(s[0].tokens == tokenize("Mr. Smith went home."));

    auto t = split_sentences("It cost 3. 50 is wrong. See e.g. the appendix.");
    REQUIRE(t.size() == 2);
    CHECK(t[0].tokens == tokenize("It cost 3. 50 is wrong."));
    CHECK(t[1].tokens == tokenize("See e.g. the appendix."));

    auto u = split_sentences("no terminator at all");
    REQUIRE(u.size() == 1);
    CHECK(u[0].tokens == tokenize("no terminator at all"));

    CHECK(split_sentences("").empty());
    CHECK(split_sentences("  \n ").empty());
}

TEST_CASE("split_sentences folds terminator runs") {
    auto s = split_sentences("What?! Really?? Yes.");
    REQUIRE(s.size() == 3);
    CHECK(s[0].tokens == tokenize("What?!"));
    CHECK(s[1].tokens == tokenize("Really??"));
}

TEST_CASE("ngrams counts duplicates and total") {
    auto g = ngrams(S({"a", "b", "a", "b"}), 2);
    CHECK(g.order == 2);
    CHECK(g.total() == 3);
    CHECK(g.counts.at({"a", "b"}) == 2);
    CHECK(g.counts.at({"b", "a"}) == 1);

    CHECK(ngrams(S({"a"}), 2).total() == 0);
    CHECK(ngrams(S({}), 1).total() == 0);
    CHECK_THROWS_AS(ngrams(S({"a"}), 0), std::invalid_argument);
}

TEST_CASE("lcs_length basic cases") {
    CHECK(lcs_length({"a", "b", "c"}, {"a", "b", "d"}) == 2);
    CHECK(lcs_length({"a", "b", "c"}, {"c", "b", "a"}) == 1);
    CHECK(lcs_length({}, {"a"}) == 0);
    CHECK(lcs_length({"x", "a", "y", "b", "z", "c"}, {"a", "b", "c"}) == 3);
}

TEST_CASE("rouge recalls on the worked example") {
    Sentence ref = S({"a", "b", "c"});
    Sentence cand = S({"a", "b", "d"});
    CHECK(rouge_n_recall(ref, cand, 1) == doctest::Approx(2.0 / 3.0));
    CHECK(rouge_n_recall(ref, cand, 2) == doctest::Approx(0.5));
    CHECK(rouge_l_recall(ref, cand) == doctest::Approx(2.0 / 3.0));
    CHECK(match_score(ref, cand) == doctest::Approx(11.0 / 18.0));
}

TEST_CASE("rouge recall clips repeated grams") {
    // ref has "a" twice, cand once: overlap of "a" is clipped to 1.
    CHECK(rouge_n_recall(S({"a", "a", "b"}), S({"a", "c"}), 1) ==
          doctest::Approx(1.0 / 3.0));
    // cand repeats don't inflate recall either.
    CHECK(rouge_n_recall(S({"a", "b"}), S({"a", "a", "a"}), 1) == doctest::Approx(0.5));
}

TEST_CASE("rouge recall edge conventions") {
    CHECK(rouge_n_recall(S({}), S({"a"}), 1) == 0.0);
    CHECK(rouge_n_recall(S({"a"}), S({"a"}), 2) == 0.0);  // ref shorter than n
    CHECK(rouge_l_recall(S({}), S({"a"})) == 0.0);
    CHECK_THROWS_AS(rouge_n_recall(S({"a"}), S({"a"}), 0), std::invalid_argument);
}

TEST_CASE("identical sequences score 1") {
    Sentence s = S({"the", "cat", "sat"});
    CHECK(rouge_n_recall(s, s, 1) == doctest::Approx(1.0));
    CHECK(rouge_n_recall(s, s, 2) == doctest::Approx(1.0));
    CHECK(rouge_l_recall(s, s) == doctest::Approx(1.0));
    CHECK(match_score(s, s) == doctest::Approx(1.0));
}

TEST_CASE("recall components match brute-force references on random inputs") {
    std::mt19937_64 rng(20260815);
    for (int it = 0; it < 400; ++it) {
        auto ref = rand_tokens(rng, 7, 4);
        auto cand = rand_tokens(rng, 7, 4);
        CAPTURE(it);
        CHECK(rouge_n_recall(S(ref), S(cand), 1) ==
              doctest::Approx(oracle::rouge_n_recall(ref, cand, 1)).epsilon(1e-12));
        CHECK(rouge_n_recall(S(ref), S(cand), 2) ==
              doctest::Approx(oracle::rouge_n_recall(ref, cand, 2)).epsilon(1e-12));
        CHECK(static_cast<int>(lcs_length(ref, cand)) ==
              oracle::lcs_recursive(ref, cand, 0, 0));
        CHECK(rouge_l_recall(S(ref), S(cand)) ==
              doctest::Approx(oracle::rouge_l_recall(ref, cand)).epsilon(1e-12));
        CHECK(match_score(S(ref), S(cand)) ==
              doctest::Approx(oracle::match_score(ref, cand)).epsilon(1e-12));
    }
}

TEST_CASE("match_score stays within [0,1] and is 0 against empty candidate") {
    std::mt19937_64 rng(7);
    for (int it = 0; it < 200; ++it) {
        auto ref = rand_tokens(rng, 6, 3);
        auto cand = rand_tokens(rng, 6, 3);
        double m = match_score(S(ref), S(cand));
        CHECK(m >= 0.0);
        CHECK(m <= 1.0);
        if (!ref.empty()) CHECK(match_score(S(ref), S({})) == 0.0);
    }
}

TEST_CASE("make_sentence records tokens and index") {
    Sentence s = make_sentence({"the", "cat", "."}, 3);
    CHECK(s.index == 3);
    CHECK(s.tokens == std::vector<Token>{"the", "cat", "."});
}
