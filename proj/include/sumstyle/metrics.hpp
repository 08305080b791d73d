#pragma once

#include <array>
#include <utility>
#include <vector>

#include "sumstyle/text.hpp"

namespace sumstyle {

// Match scores of a summary sentence against every document sentence,
// plus the top-K slice used by the scatter entropy.
struct MatchProfile {
    std::vector<std::pair<int, double>> scores;  // (1-based sentence index, score)
    int k = 0;
    std::vector<double> top_scores;  // descending, length min(k, |doc|)
    std::vector<double> probs;       // top_scores normalized; all zero when the sum is zero
};

struct FusionScores {
    double recall = 0.0;
    double scatter = 0.0;
    double fusion_index = 0.0;
    int best_match_index = 0;  // 1-based document sentence index attaining the recall
};

struct Fragment {
    int start = 0;  // 1-based position in the summary sentence
    int length = 0;
};

struct ExtractiveFragmentStats {
    double coverage = 0.0;
    double density = 0.0;  // tokens
    std::vector<Fragment> fragments;
};

struct NoveltyStats {
    std::array<double, 3> novel = {0.0, 0.0, 0.0};  // orders 1..3 at novel[n-1]
};

// Best single-sentence match: (max over doc sentences of match_score, first
// 1-based index attaining it). Throws std::invalid_argument on an empty doc.
std::pair<double, int> recall_rc(const Sentence& summary_sentence, const Document& doc);

// Normalized entropy of the top-K slice of `scores`. Returns 0 when the
// effective K' = min(k, |scores|) is 1 or all retained scores are zero.
// Natural log, normalized by log K'. Throws for k < 1.
double normalized_topk_entropy(const std::vector<double>& scores, int k);

MatchProfile match_profile(const Sentence& summary_sentence, const Document& doc, int k);

double scatter_sc(const Sentence& summary_sentence, const Document& doc, int k);

// FI = (1 - RC) * SC together with its factors.
FusionScores fusion_index(const Sentence& summary_sentence, const Document& doc, int k);

// Greedy longest-match shared fragments against the flattened document stream.
ExtractiveFragmentStats extractive_fragments(const Sentence& summary_sentence,
                                             const Document& doc);

// Fraction of the sentence's n-grams (with multiplicity) absent from the
// document's n-gram set, for n in {1,2,3}. Document n-grams are the union of
// per-sentence n-grams; none span sentence boundaries.
NoveltyStats novel_ngram_fraction(const Sentence& summary_sentence, const Document& doc);

// Sample Pearson correlation. Throws std::invalid_argument on length mismatch,
// fewer than two points, or zero variance in either input.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace sumstyle
