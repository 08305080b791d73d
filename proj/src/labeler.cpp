#include "sumstyle/labeler.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace sumstyle {

long long StyleStats::transition_count() const {
    long long total = 0;
    for (const auto& row : transition_counts)
        for (long long c : row) total += c;
    return total;
}

double StyleStats::ext_fraction() const {
    long long total = sentence_count();
    return total == 0 ? 0.0 : static_cast<double>(ext_count) / static_cast<double>(total);
}

double StyleStats::abs_fraction() const {
    long long total = sentence_count();
    return total == 0 ? 0.0 : static_cast<double>(abs_count) / static_cast<double>(total);
}

std::array<std::array<double, 2>, 2> StyleStats::transition_fractions() const {
    std::array<std::array<double, 2>, 2> out = {};
    long long total = transition_count();
    if (total == 0) return out;
    for (int from = 0; from < 2; ++from)
        for (int to = 0; to < 2; ++to)
            out[from][to] = static_cast<double>(transition_counts[from][to]) /
                            static_cast<double>(total);
    return out;
}

LabeledPair label_pair(const Document& doc, const std::vector<Sentence>& summary,
                       const OracleConfig& cfg) {
    if (doc.sentences.empty()) throw std::invalid_argument("label_pair: empty document");
    LabeledPair pair;
    pair.doc = doc;
    pair.summary.reserve(summary.size());
    for (const Sentence& s : summary) {
        LabeledSentence ls;
        ls.sentence = s;
        ls.scores = fusion_index(s, doc, cfg.k);
        if (ls.scores.fusion_index > cfg.gamma) {
            ls.label.kind = StyleKind::Abs;
            ls.label.source_index = 0;
        } else {
            ls.label.kind = StyleKind::Ext;
            ls.label.source_index = ls.scores.best_match_index;
        }
        pair.summary.push_back(std::move(ls));
    }
    return pair;
}

KTuneResult tune_k(const std::vector<AnnotatedSentence>& annotations,
                   const std::vector<Document>& docs,
                   const std::vector<int>& candidate_ks) {
    if (annotations.size() < 2)
        throw std::invalid_argument("tune_k: need at least two annotations");
    if (candidate_ks.empty()) throw std::invalid_argument("tune_k: no candidate ks");

    std::unordered_map<std::string, const Document*> by_id;
    for (const Document& d : docs) by_id[d.id] = &d;

    std::vector<double> human;
    human.reserve(annotations.size());
    for (const AnnotatedSentence& a : annotations) human.push_back(a.human_fusion_degree);

    KTuneResult result;
    double best_corr = -2.0;
    for (int k : candidate_ks) {
        std::vector<double> fi;
        fi.reserve(annotations.size());
        for (const AnnotatedSentence& a : annotations) {
            auto it = by_id.find(a.doc_id);
            if (it == by_id.end())
                throw std::invalid_argument("tune_k: unknown document id " + a.doc_id);
            fi.push_back(fusion_index(a.sentence, *it->second, k).fusion_index);
        }
        double corr = pearson(fi, human);
        result.correlation_per_k.emplace_back(k, corr);
        if (corr > best_corr || (corr == best_corr && k < result.best_k)) {
            best_corr = corr;
            result.best_k = k;
        }
    }
    return result;
}

GammaTuneResult tune_gamma(const std::vector<std::pair<double, StyleKind>>& fi_with_human,
                           const std::vector<double>& candidate_gammas) {
    if (fi_with_human.empty()) throw std::invalid_argument("tune_gamma: empty input");
    if (candidate_gammas.empty()) throw std::invalid_argument("tune_gamma: no candidates");

    GammaTuneResult result;
    double best_acc = -1.0;
    result.best_gamma = candidate_gammas.front();
    for (double gamma : candidate_gammas) {
        long long agree = 0;
        for (const auto& [fi, human] : fi_with_human) {
            StyleKind predicted = fi > gamma ? StyleKind::Abs : StyleKind::Ext;
            if (predicted == human) ++agree;
        }
        double acc = static_cast<double>(agree) / static_cast<double>(fi_with_human.size());
        result.accuracy_per_gamma.emplace_back(gamma, acc);
        if (acc > best_acc || (acc == best_acc && gamma < result.best_gamma)) {
            best_acc = acc;
            result.best_gamma = gamma;
        }
    }
    return result;
}

StyleStats corpus_stats(const std::vector<LabeledPair>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("corpus_stats: empty corpus");
    StyleStats stats;
    for (const LabeledPair& pair : pairs) {
        for (std::size_t pos = 0; pos < pair.summary.size(); ++pos) {
            const StyleLabel& label = pair.summary[pos].label;
            int cls = label.kind == StyleKind::Ext ? 0 : 1;
            if (cls == 0)
                ++stats.ext_count;
            else
                ++stats.abs_count;
            int bucket = std::min<int>(static_cast<int>(pos), kPositionBuckets);
            ++stats.position_counts[bucket][cls];
            if (pos > 0) {
                int prev = pair.summary[pos - 1].label.kind == StyleKind::Ext ? 0 : 1;
                ++stats.transition_counts[prev][cls];
            }
        }
    }
    return stats;
}

double style_prediction_f1(const std::vector<StyleKind>& predicted,
                           const std::vector<StyleKind>& oracle) {
    if (predicted.size() != oracle.size())
        throw std::invalid_argument("style_prediction_f1: length mismatch");
    if (predicted.empty()) throw std::invalid_argument("style_prediction_f1: empty input");

    // confusion[p][o], 0 = ext, 1 = abs
    long long confusion[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        int p = predicted[i] == StyleKind::Ext ? 0 : 1;
        int o = oracle[i] == StyleKind::Ext ? 0 : 1;
        ++confusion[p][o];
    }

    double f1_sum = 0.0;
    for (int cls = 0; cls < 2; ++cls) {
        long long tp = confusion[cls][cls];
        long long fp = confusion[cls][1 - cls];
        long long fn = confusion[1 - cls][cls];
        double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        double recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall)
                                             : 0.0;
        f1_sum += f1;
    }
    return f1_sum / 2.0;
}

}  // namespace sumstyle
