#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "sumstyle/metrics.hpp"
#include "sumstyle/text.hpp"

namespace sumstyle {

enum class StyleKind { Ext, Abs };

struct StyleLabel {
    StyleKind kind = StyleKind::Abs;
    int source_index = 0;  // 1-based document sentence index; valid iff kind == Ext
};

struct OracleConfig {
    int k = 5;           // top-K for the scatter entropy
    double gamma = 0.7;  // fusion index threshold; FI > gamma labels Abs
};

struct LabeledSentence {
    Sentence sentence;
    StyleLabel label;
    FusionScores scores;
};

struct LabeledPair {
    Document doc;
    std::vector<LabeledSentence> summary;
};

// Per-position style counts are truncated at this many summary positions;
// everything beyond lands in one overflow bucket.
inline constexpr int kPositionBuckets = 20;

struct StyleStats {
    long long ext_count = 0;
    long long abs_count = 0;
    // [bucket][0]=ext, [bucket][1]=abs; buckets 0..19 are positions 1..20,
    // bucket 20 collects later positions.
    std::array<std::array<long long, 2>, kPositionBuckets + 1> position_counts = {};
    // transition_counts[from][to], 0 = ext, 1 = abs, over consecutive pairs.
    std::array<std::array<long long, 2>, 2> transition_counts = {};

    long long sentence_count() const { return ext_count + abs_count; }
    long long transition_count() const;
    double ext_fraction() const;
    double abs_fraction() const;
    // Raw transition fractions; entries sum to 1 when any transition exists.
    std::array<std::array<double, 2>, 2> transition_fractions() const;
};

struct AnnotatedSentence {
    Sentence sentence;
    std::string doc_id;
    double human_fusion_degree = 0.0;
};

struct KTuneResult {
    int best_k = 0;
    std::vector<std::pair<int, double>> correlation_per_k;
};

struct GammaTuneResult {
    double best_gamma = 0.0;
    std::vector<std::pair<double, double>> accuracy_per_gamma;
};

// Labels every summary sentence: FI > gamma -> Abs, FI <= gamma -> Ext with
// the best-match sentence as rewrite source.
LabeledPair label_pair(const Document& doc, const std::vector<Sentence>& summary,
                       const OracleConfig& cfg);

// Pearson correlation of FI against human fusion degrees for each candidate K;
// best is the argmax, smallest K on ties. `docs` are looked up by id.
KTuneResult tune_k(const std::vector<AnnotatedSentence>& annotations,
                   const std::vector<Document>& docs, const std::vector<int>& candidate_ks);

// Binary agreement between thresholded FI and human ext/abs styles for each
// candidate gamma; best is the argmax, smallest gamma on ties.
GammaTuneResult tune_gamma(const std::vector<std::pair<double, StyleKind>>& fi_with_human,
                           const std::vector<double>& candidate_gammas);

StyleStats corpus_stats(const std::vector<LabeledPair>& pairs);

// Macro-averaged F1 over the two classes.
double style_prediction_f1(const std::vector<StyleKind>& predicted,
                           const std::vector<StyleKind>& oracle);

}  // namespace sumstyle
