#include "sumstyle/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace sumstyle {

std::pair<double, int> recall_rc(const Sentence& summary_sentence, const Document& doc) {
    if (doc.sentences.empty()) throw std::invalid_argument("recall_rc: empty document");
    double best = -1.0;
    int best_index = 0;
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
        double score = match_score(summary_sentence, doc.sentences[i]);
        if (score > best) {
            best = score;
            best_index = static_cast<int>(i) + 1;
        }
    }
    return {best, best_index};
}

double normalized_topk_entropy(const std::vector<double>& scores, int k) {
    if (k < 1) throw std::invalid_argument("normalized_topk_entropy: k must be >= 1");
    int k_eff = std::min<int>(k, static_cast<int>(scores.size()));
    if (k_eff <= 1) return 0.0;

    std::vector<double> top(scores);
    std::partial_sort(top.begin(), top.begin() + k_eff, top.end(), std::greater<double>());
    top.resize(k_eff);

    double sum = 0.0;
    for (double r : top) sum += r;
    if (sum <= 0.0) return 0.0;

    double entropy = 0.0;
    for (double r : top) {
        double p = r / sum;
        if (p > 0.0) entropy -= p * std::log(p);
    }
    return entropy / std::log(static_cast<double>(k_eff));
}

MatchProfile match_profile(const Sentence& summary_sentence, const Document& doc, int k) {
    if (k < 1) throw std::invalid_argument("match_profile: k must be >= 1");
    if (doc.sentences.empty()) throw std::invalid_argument("match_profile: empty document");

    MatchProfile mp;
    mp.k = k;
    mp.scores.reserve(doc.sentences.size());
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
        mp.scores.emplace_back(static_cast<int>(i) + 1,
                               match_score(summary_sentence, doc.sentences[i]));
    }

    int k_eff = std::min<int>(k, static_cast<int>(mp.scores.size()));
    std::vector<double> values;
    values.reserve(mp.scores.size());
    for (const auto& [idx, score] : mp.scores) values.push_back(score);
    std::partial_sort(values.begin(), values.begin() + k_eff, values.end(),
                      std::greater<double>());
    values.resize(k_eff);
    mp.top_scores = values;

    double sum = 0.0;
    for (double r : values) sum += r;
    mp.probs.assign(values.size(), 0.0);
    if (sum > 0.0) {
        for (std::size_t j = 0; j < values.size(); ++j) mp.probs[j] = values[j] / sum;
    }
    return mp;
}

double scatter_sc(const Sentence& summary_sentence, const Document& doc, int k) {
    if (k < 1) throw std::invalid_argument("scatter_sc: k must be >= 1");
    if (doc.sentences.empty()) throw std::invalid_argument("scatter_sc: empty document");
    std::vector<double> scores;
    scores.reserve(doc.sentences.size());
    for (const Sentence& s : doc.sentences) scores.push_back(match_score(summary_sentence, s));
    return normalized_topk_entropy(scores, k);
}

FusionScores fusion_index(const Sentence& summary_sentence, const Document& doc, int k) {
    FusionScores fs;
    auto [rc, best_index] = recall_rc(summary_sentence, doc);
    fs.recall = rc;
    fs.best_match_index = best_index;
    fs.scatter = scatter_sc(summary_sentence, doc, k);
    fs.fusion_index = (1.0 - fs.recall) * fs.scatter;
    return fs;
}

ExtractiveFragmentStats extractive_fragments(const Sentence& summary_sentence,
                                             const Document& doc) {
    std::vector<Token> stream;
    for (const Sentence& s : doc.sentences) {
        stream.insert(stream.end(), s.tokens.begin(), s.tokens.end());
    }

    const std::vector<Token>& sum = summary_sentence.tokens;
    ExtractiveFragmentStats stats;
    double length_sum = 0.0;
    double length_sq_sum = 0.0;

    std::size_t i = 0;
    while (i < sum.size()) {
        std::size_t best_len = 0;
        for (std::size_t j = 0; j < stream.size(); ++j) {
            if (stream[j] != sum[i]) continue;
            std::size_t len = 0;
            while (i + len < sum.size() && j + len < stream.size() &&
                   stream[j + len] == sum[i + len]) {
                ++len;
            }
            best_len = std::max(best_len, len);
        }
        if (best_len > 0) {
            stats.fragments.push_back(
                {static_cast<int>(i) + 1, static_cast<int>(best_len)});
            length_sum += static_cast<double>(best_len);
            length_sq_sum += static_cast<double>(best_len) * static_cast<double>(best_len);
            i += best_len;
        } else {
            ++i;
        }
    }

    if (!sum.empty()) {
        stats.coverage = length_sum / static_cast<double>(sum.size());
        stats.density = length_sq_sum / static_cast<double>(sum.size());
    }
    return stats;
}

NoveltyStats novel_ngram_fraction(const Sentence& summary_sentence, const Document& doc) {
    NoveltyStats stats;
    for (int n = 1; n <= 3; ++n) {
        NGramMultiset sum_grams = ngrams(summary_sentence, n);
        long long total = sum_grams.total();
        if (total == 0) {
            stats.novel[n - 1] = 0.0;
            continue;
        }
        std::set<std::vector<Token>> doc_grams;
        for (const Sentence& s : doc.sentences) {
            for (const auto& [gram, count] : ngrams(s, n).counts) doc_grams.insert(gram);
        }
        long long novel = 0;
        for (const auto& [gram, count] : sum_grams.counts) {
            if (doc_grams.find(gram) == doc_grams.end()) novel += count;
        }
        stats.novel[n - 1] = static_cast<double>(novel) / static_cast<double>(total);
    }
    return stats;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
    if (x.size() < 2) throw std::invalid_argument("pearson: need at least two points");

    const double n = static_cast<double>(x.size());
    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mean_x += x[i];
        mean_y += y[i];
    }
    mean_x /= n;
    mean_y /= n;

    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double dx = x[i] - mean_x;
        double dy = y[i] - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson: zero variance");
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace sumstyle
