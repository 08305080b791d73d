#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sumstyle/labeler.hpp"

using namespace sumstyle;

namespace {

Sentence S(std::vector<Token> tokens) { return make_sentence(std::move(tokens)); }

Document D(std::vector<std::vector<Token>> sents, std::string id = "doc") {
    Document doc;
    doc.id = std::move(id);
    for (std::size_t i = 0; i < sents.size(); ++i) {
        doc.sentences.push_back(make_sentence(std::move(sents[i]), static_cast<int>(i) + 1));
    }
    return doc;
}

std::vector<std::vector<Token>> bare(const Document& doc) {
    std::vector<std::vector<Token>> out;
    for (const Sentence& s : doc.sentences) out.push_back(s.tokens);
    return out;
}

std::vector<Token> rand_tokens(std::mt19937_64& rng, int min_len, int max_len,
                               int alphabet) {
    std::uniform_int_distribution<int> len_d(min_len, max_len);
    std::uniform_int_distribution<int> tok_d(0, alphabet - 1);
    std::vector<Token> out;
    int len = len_d(rng);
    for (int i = 0; i < len; ++i) {
        out.push_back(std::string(1, static_cast<char>('a' + tok_d(rng))));
    }
    return out;
}

Document rand_doc(std::mt19937_64& rng, int min_sents, int max_sents, int alphabet,
                  std::string id = "doc") {
    std::uniform_int_distribution<int> n_d(min_sents, max_sents);
    std::vector<std::vector<Token>> sents;
    int n = n_d(rng);
    for (int i = 0; i < n; ++i) sents.push_back(rand_tokens(rng, 1, 6, alphabet));
    return D(std::move(sents), std::move(id));
}

// Minimal pair carrying only the label kinds, for the stats aggregator.
LabeledPair mk_pair(const std::vector<StyleKind>& kinds) {
    LabeledPair pair;
    pair.doc = D({{"a"}});
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        LabeledSentence ls;
        ls.sentence = make_sentence({"a"}, static_cast<int>(i) + 1);
        ls.label.kind = kinds[i];
        ls.label.source_index = kinds[i] == StyleKind::Ext ? 1 : 0;
        pair.summary.push_back(std::move(ls));
    }
    return pair;
}

}  // namespace

TEST_CASE("verbatim copies label Ext with the copied sentence as source") {
    Document doc = D({{"p", "q"}, {"r", "s", "t"}});
    OracleConfig cfg;  // defaults k = 5, gamma = 0.7
    LabeledPair pair = label_pair(doc, {S({"r", "s", "t"})}, cfg);
    REQUIRE(pair.summary.size() == 1);
    CHECK(pair.summary[0].label.kind == StyleKind::Ext);
    CHECK(pair.summary[0].label.source_index == 2);
    CHECK(pair.summary[0].scores.fusion_index == doctest::Approx(0.0));
}

TEST_CASE("gamma zero sends any positive fusion index to Abs") {
    Document doc = D({{"a", "b"}, {"c", "d"}});
    OracleConfig cfg;
    cfg.gamma = 0.0;
    // Half of each doc sentence: positive recall against both, so FI > 0.
    LabeledPair pair = label_pair(doc, {S({"a", "c"})}, cfg);
    REQUIRE(pair.summary.size() == 1);
    CHECK(pair.summary[0].scores.fusion_index > 0.0);
    CHECK(pair.summary[0].label.kind == StyleKind::Abs);
    CHECK(pair.summary[0].label.source_index == 0);
}

TEST_CASE("a sentence fused evenly from two sources labels Abs at gamma 0.3") {
    Document doc = D({{"a", "b", "c"}, {"m", "n", "o"}, {"x", "y", "z"}});
    Sentence fused = S({"a", "b", "x", "y"});  // half from sentence 1, half from 3
    double fi = oracle::fusion(fused.tokens, bare(doc), 5).fusion_index;
    REQUIRE(fi > 0.3);  // the fixture itself must clear the threshold

    OracleConfig cfg;
    cfg.gamma = 0.3;
    LabeledPair pair = label_pair(doc, {fused}, cfg);
    CHECK(pair.summary[0].label.kind == StyleKind::Abs);
}

TEST_CASE("fusion index exactly at gamma labels Ext") {
    Document doc = D({{"a", "b"}, {"c", "d"}});
    Sentence s = S({"a", "c"});
    OracleConfig cfg;
    cfg.k = 5;
    cfg.gamma = fusion_index(s, doc, cfg.k).fusion_index;
    LabeledPair pair = label_pair(doc, {s}, cfg);
    CHECK(pair.summary[0].label.kind == StyleKind::Ext);
}

TEST_CASE("label_pair rejects an empty document") {
    CHECK_THROWS_AS(label_pair(Document{}, {S({"a"})}, OracleConfig{}),
                    std::invalid_argument);
}

TEST_CASE("labels agree with an independent reimplementation of the rule") {
    std::mt19937_64 rng(20260815);
    std::uniform_real_distribution<double> g_d(0.0, 1.0);
    for (int it = 0; it < 200; ++it) {
        Document doc = rand_doc(rng, 1, 5, 4);
        OracleConfig cfg;
        cfg.gamma = g_d(rng);
        std::vector<Sentence> summary;
        int n = 1 + static_cast<int>(rng() % 3);
        for (int i = 0; i < n; ++i)
            summary.push_back(make_sentence(rand_tokens(rng, 1, 6, 4), i + 1));

        LabeledPair pair = label_pair(doc, summary, cfg);
        REQUIRE(pair.summary.size() == summary.size());
        for (std::size_t i = 0; i < summary.size(); ++i) {
            auto ref = oracle::fusion(summary[i].tokens, bare(doc), cfg.k);
            CAPTURE(it);
            CHECK(pair.summary[i].scores.fusion_index ==
                  doctest::Approx(ref.fusion_index).epsilon(1e-12));
            if (ref.fusion_index > cfg.gamma) {
                CHECK(pair.summary[i].label.kind == StyleKind::Abs);
            } else {
                CHECK(pair.summary[i].label.kind == StyleKind::Ext);
                CHECK(pair.summary[i].label.source_index == ref.best_index);
                CHECK(pair.summary[i].label.source_index >= 1);
                CHECK(pair.summary[i].label.source_index <=
                      static_cast<int>(doc.sentences.size()));
            }
        }
    }
}

TEST_CASE("labeling is deterministic and monotone in gamma") {
    std::mt19937_64 rng(17);
    for (int it = 0; it < 100; ++it) {
        Document doc = rand_doc(rng, 1, 5, 4);
        std::vector<Sentence> summary{make_sentence(rand_tokens(rng, 1, 6, 4), 1),
                                      make_sentence(rand_tokens(rng, 1, 6, 4), 2)};
        OracleConfig lo, hi;
        lo.gamma = 0.2;
        hi.gamma = 0.6;
        LabeledPair a = label_pair(doc, summary, lo);
        LabeledPair b = label_pair(doc, summary, lo);
        LabeledPair c = label_pair(doc, summary, hi);
        for (std::size_t i = 0; i < summary.size(); ++i) {
            CHECK(a.summary[i].label.kind == b.summary[i].label.kind);
            CHECK(a.summary[i].label.source_index == b.summary[i].label.source_index);
            // Raising gamma can only move labels from Abs to Ext.
            if (a.summary[i].label.kind == StyleKind::Ext)
                CHECK(c.summary[i].label.kind == StyleKind::Ext);
        }
    }
}

TEST_CASE("tune_k recovers the K that generated the human scores") {
    std::mt19937_64 rng(23);
    std::vector<Document> docs;
    std::vector<AnnotatedSentence> annotations;
    for (int i = 0; i < 40; ++i) {
        std::string id = "d" + std::to_string(i);
        docs.push_back(rand_doc(rng, 4, 6, 4, id));
        AnnotatedSentence a;
        a.sentence = make_sentence(rand_tokens(rng, 2, 6, 4), 1);
        a.doc_id = id;
        a.human_fusion_degree =
            oracle::fusion(a.sentence.tokens, bare(docs.back()), 3).fusion_index;
        annotations.push_back(std::move(a));
    }
    KTuneResult result = tune_k(annotations, docs, {2, 3, 5});
    CHECK(result.best_k == 3);
    REQUIRE(result.correlation_per_k.size() == 3);
    for (const auto& [k, corr] : result.correlation_per_k) {
        if (k == 3) CHECK(corr == doctest::Approx(1.0));
        CHECK(corr <= 1.0 + 1e-12);
    }
}

TEST_CASE("tune_k with a single candidate returns it unconditionally") {
    std::mt19937_64 rng(29);
    std::vector<Document> docs;
    std::vector<AnnotatedSentence> annotations;
    for (int i = 0; i < 10; ++i) {
        std::string id = "d" + std::to_string(i);
        docs.push_back(rand_doc(rng, 2, 4, 4, id));
        AnnotatedSentence a;
        a.sentence = make_sentence(rand_tokens(rng, 2, 6, 4), 1);
        a.doc_id = id;
        a.human_fusion_degree = static_cast<double>(i);
        annotations.push_back(std::move(a));
    }
    KTuneResult result = tune_k(annotations, docs, {4});
    CHECK(result.best_k == 4);
    CHECK(result.correlation_per_k.size() == 1);
}

TEST_CASE("tune_k surfaces degenerate inputs as errors") {
    std::mt19937_64 rng(31);
    std::vector<Document> docs;
    std::vector<AnnotatedSentence> annotations;
    for (int i = 0; i < 6; ++i) {
        std::string id = "d" + std::to_string(i);
        docs.push_back(rand_doc(rng, 2, 4, 4, id));
        AnnotatedSentence a;
        a.sentence = make_sentence(rand_tokens(rng, 2, 6, 4), 1);
        a.doc_id = id;
        a.human_fusion_degree = 0.5;  // constant: zero variance
        annotations.push_back(std::move(a));
    }
    CHECK_THROWS_AS(tune_k(annotations, docs, {2, 3}), std::invalid_argument);

    annotations[0].human_fusion_degree = 1.0;
    annotations[1].doc_id = "missing";
    CHECK_THROWS_AS(tune_k(annotations, docs, {2}), std::invalid_argument);

    CHECK_THROWS_AS(tune_k({}, docs, {2}), std::invalid_argument);
    CHECK_THROWS_AS(tune_k(annotations, docs, {}), std::invalid_argument);
}

TEST_CASE("tune_gamma finds the separating threshold") {
    // Human style = (FI > 0.5); only 0.48 separates the classes perfectly.
    std::vector<std::pair<double, StyleKind>> data{
        {0.10, StyleKind::Ext}, {0.30, StyleKind::Ext}, {0.45, StyleKind::Ext},
        {0.55, StyleKind::Abs}, {0.80, StyleKind::Abs},
    };
    GammaTuneResult result = tune_gamma(data, {0.2, 0.48, 0.6});
    CHECK(result.best_gamma == doctest::Approx(0.48));
    for (const auto& [gamma, acc] : result.accuracy_per_gamma) {
        if (gamma == 0.48) CHECK(acc == doctest::Approx(1.0));
        else CHECK(acc < 1.0);
    }
}

TEST_CASE("tune_gamma prefers the smallest gamma among ties") {
    // All human-Ext: every gamma >= max FI reaches accuracy 1.
    std::vector<std::pair<double, StyleKind>> data{
        {0.10, StyleKind::Ext}, {0.50, StyleKind::Ext}, {0.70, StyleKind::Ext}};
    GammaTuneResult result = tune_gamma(data, {0.4, 0.7, 0.9});
    CHECK(result.best_gamma == doctest::Approx(0.7));
}

TEST_CASE("tune_gamma counts disagreements per candidate") {
    // gamma = 0.3 misclassifies 1 of 10; gamma = 0.7 misclassifies 2.
    std::vector<std::pair<double, StyleKind>> data{
        {0.10, StyleKind::Ext}, {0.20, StyleKind::Ext}, {0.40, StyleKind::Abs},
        {0.50, StyleKind::Abs}, {0.80, StyleKind::Abs}, {0.90, StyleKind::Abs},
        {0.25, StyleKind::Ext}, {0.35, StyleKind::Ext}, {0.75, StyleKind::Abs},
        {0.15, StyleKind::Ext},
    };
    GammaTuneResult result = tune_gamma(data, {0.3, 0.7});
    CHECK(result.best_gamma == doctest::Approx(0.3));
    REQUIRE(result.accuracy_per_gamma.size() == 2);
    CHECK(result.accuracy_per_gamma[0].second == doctest::Approx(0.9));
    CHECK(result.accuracy_per_gamma[1].second == doctest::Approx(0.8));
}

TEST_CASE("tune_gamma's winner beats every other candidate") {
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> fi_d(0.0, 1.0);
    for (int it = 0; it < 50; ++it) {
        std::vector<std::pair<double, StyleKind>> data;
        for (int i = 0; i < 12; ++i) {
            data.emplace_back(fi_d(rng),
                              rng() % 2 == 0 ? StyleKind::Ext : StyleKind::Abs);
        }
        std::vector<double> gammas{0.1, 0.3, 0.5, 0.7, 0.9};
        GammaTuneResult result = tune_gamma(data, gammas);
        double best_acc = -1.0;
        for (const auto& [gamma, acc] : result.accuracy_per_gamma) {
            if (gamma == result.best_gamma) best_acc = acc;
        }
        for (const auto& [gamma, acc] : result.accuracy_per_gamma) {
            CHECK(acc <= best_acc + 1e-15);
        }
    }
}

TEST_CASE("tune_gamma rejects empty inputs") {
    CHECK_THROWS_AS(tune_gamma({}, {0.5}), std::invalid_argument);
    CHECK_THROWS_AS(tune_gamma({{0.5, StyleKind::Ext}}, {}), std::invalid_argument);
}

TEST_CASE("corpus_stats on an all-Ext corpus") {
    std::vector<LabeledPair> pairs{
        mk_pair({StyleKind::Ext, StyleKind::Ext, StyleKind::Ext}),
        mk_pair({StyleKind::Ext, StyleKind::Ext}),
    };
    StyleStats stats = corpus_stats(pairs);
    CHECK(stats.ext_fraction() == doctest::Approx(1.0));
    CHECK(stats.abs_fraction() == doctest::Approx(0.0));
    CHECK(stats.transition_counts[0][0] == 3);
    CHECK(stats.transition_count() == 3);
    auto tf = stats.transition_fractions();
    CHECK(tf[0][0] == doctest::Approx(1.0));
    CHECK(tf[0][1] + tf[1][0] + tf[1][1] == doctest::Approx(0.0));
}

TEST_CASE("alternating labels split transitions between ext->abs and abs->ext") {
    std::vector<LabeledPair> pairs;
    for (int i = 0; i < 5; ++i) {
        pairs.push_back(mk_pair(
            {StyleKind::Ext, StyleKind::Abs, StyleKind::Ext, StyleKind::Abs}));
    }
    StyleStats stats = corpus_stats(pairs);
    auto tf = stats.transition_fractions();
    CHECK(tf[0][1] == doctest::Approx(2.0 / 3.0));  // ext->abs twice per summary
    CHECK(tf[1][0] == doctest::Approx(1.0 / 3.0));  // abs->ext once per summary
    CHECK(tf[0][0] == doctest::Approx(0.0));
    CHECK(tf[1][1] == doctest::Approx(0.0));
    CHECK(stats.ext_fraction() == doctest::Approx(0.5));
}

TEST_CASE("positions beyond the bucket range land in the overflow bucket") {
    std::vector<StyleKind> kinds(25, StyleKind::Ext);
    kinds[23] = StyleKind::Abs;
    StyleStats stats = corpus_stats({mk_pair(kinds)});
    long long in_overflow = stats.position_counts[kPositionBuckets][0] +
                            stats.position_counts[kPositionBuckets][1];
    CHECK(in_overflow == 5);  // positions 21..25
    CHECK(stats.position_counts[kPositionBuckets][1] == 1);
    CHECK(stats.position_counts[0][0] == 1);
}

TEST_CASE("overall fractions equal the position-weighted mean") {
    std::mt19937_64 rng(43);
    std::vector<LabeledPair> pairs;
    for (int i = 0; i < 20; ++i) {
        std::vector<StyleKind> kinds;
        int n = 1 + static_cast<int>(rng() % 6);
        for (int j = 0; j < n; ++j)
            kinds.push_back(rng() % 2 == 0 ? StyleKind::Ext : StyleKind::Abs);
        pairs.push_back(mk_pair(kinds));
    }
    StyleStats stats = corpus_stats(pairs);
    long long ext_from_positions = 0, total_from_positions = 0;
    for (const auto& bucket : stats.position_counts) {
        ext_from_positions += bucket[0];
        total_from_positions += bucket[0] + bucket[1];
    }
    CHECK(total_from_positions == stats.sentence_count());
    CHECK(stats.ext_fraction() ==
          doctest::Approx(static_cast<double>(ext_from_positions) /
                          static_cast<double>(total_from_positions)));
    CHECK(stats.ext_fraction() + stats.abs_fraction() == doctest::Approx(1.0));
}

TEST_CASE("corpus_stats rejects an empty corpus") {
    CHECK_THROWS_AS(corpus_stats({}), std::invalid_argument);
}

TEST_CASE("style_prediction_f1 extremes") {
    std::vector<StyleKind> oracle{StyleKind::Ext, StyleKind::Abs, StyleKind::Ext,
                                  StyleKind::Abs};
    CHECK(style_prediction_f1(oracle, oracle) == doctest::Approx(1.0));
    std::vector<StyleKind> flipped{StyleKind::Abs, StyleKind::Ext, StyleKind::Abs,
                                   StyleKind::Ext};
    CHECK(style_prediction_f1(flipped, oracle) == doctest::Approx(0.0));
}

TEST_CASE("style_prediction_f1 on a balanced symmetric confusion") {
    // 10 sentences, 5 per class, one error in each direction: macro-F1 = 0.8.
    std::vector<StyleKind> oracle, predicted;
    for (int i = 0; i < 5; ++i) oracle.push_back(StyleKind::Ext);
    for (int i = 0; i < 5; ++i) oracle.push_back(StyleKind::Abs);
    predicted = oracle;
    predicted[0] = StyleKind::Abs;
    predicted[5] = StyleKind::Ext;
    CHECK(style_prediction_f1(predicted, oracle) == doctest::Approx(0.8));
}

TEST_CASE("style_prediction_f1 handles a degenerate single-class prediction") {
    std::vector<StyleKind> oracle{StyleKind::Ext, StyleKind::Abs};
    std::vector<StyleKind> predicted{StyleKind::Ext, StyleKind::Ext};
    // Ext: precision 1/2, recall 1 -> F1 2/3. Abs: no predictions -> F1 0.
    CHECK(style_prediction_f1(predicted, oracle) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("style_prediction_f1 input validation") {
    CHECK_THROWS_AS(style_prediction_f1({StyleKind::Ext}, {}), std::invalid_argument);
    CHECK_THROWS_AS(style_prediction_f1({}, {}), std::invalid_argument);
}
