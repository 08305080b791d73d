#pragma once

#include <map>
#include <string>
#include <vector>

namespace sumstyle {

// A token is a lowercased piece of text with no internal whitespace.
using Token = std::string;

struct Sentence {
    std::vector<Token> tokens;
    int index = 0;  // 1-based ordinal within the parent text
};

struct Document {
    std::string id;
    std::vector<Sentence> sentences;
};

// Multiset of n-grams keyed by the token tuple.
struct NGramMultiset {
    int order = 0;
    std::map<std::vector<Token>, int> counts;

    long long total() const;
};

// Lowercases, splits on whitespace, strips leading/trailing ASCII punctuation
// from each piece and emits the stripped characters as separate tokens.
std::vector<Token> tokenize(const std::string& text);

// Rule-based splitter: breaks after '.', '!' or '?' followed by whitespace and
// a capital letter (or end of text), with a small abbreviation guard.
// Corpora that already provide sentence arrays bypass this entirely.
std::vector<Sentence> split_sentences(const std::string& text);

// All contiguous n-grams of s with multiplicity. Empty if |tokens| < n.
// Throws std::invalid_argument for n < 1.
NGramMultiset ngrams(const Sentence& s, int n);

// Length of the longest common subsequence of two token lists.
std::size_t lcs_length(const std::vector<Token>& a, const std::vector<Token>& b);

// Clipped n-gram overlap divided by the n-gram count of `ref`.
// Returns 0 when `ref` has no n-grams of order n.
double rouge_n_recall(const Sentence& ref, const Sentence& cand, int n);

// LCS length divided by |ref|.
double rouge_l_recall(const Sentence& ref, const Sentence& cand);

// Mean of ROUGE-1, ROUGE-2 and ROUGE-L recalls of `ref` given `cand`.
double match_score(const Sentence& ref, const Sentence& cand);

// Convenience: build a Sentence from surface tokens.
Sentence make_sentence(std::vector<Token> tokens, int index = 1);

}  // namespace sumstyle
