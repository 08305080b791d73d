#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sumstyle/labeler.hpp"
#include "sumstyle/model/checkpoint.hpp"
#include "sumstyle/model/infer.hpp"
#include "sumstyle/model/net.hpp"
#include "sumstyle/model/synthetic.hpp"
#include "sumstyle/model/train.hpp"

using namespace sumstyle;

namespace {

ModelConfig corpus_cfg(const Vocab& v, unsigned long long seed = 1) {
    ModelConfig cfg;
    cfg.vocab_size = v.size();
    cfg.d_model = 32;
    cfg.n_heads = 4;
    cfg.n_layers = 2;
    cfg.ffn_dim = 64;
    cfg.max_positions = 96;
    cfg.max_sentences = v.max_sentences();
    cfg.seed = seed;
    return cfg;
}

std::vector<ModelExample> full_examples(const SyntheticCorpus& corpus) {
    std::vector<ModelExample> out;
    for (const LabeledPair& pair : corpus.pairs) out.push_back(make_example(pair, corpus.vocab));
    return out;
}

Document tiny_doc() {
    Document doc;
    doc.id = "d";
    doc.sentences.push_back(make_sentence({"a", "b", "c"}, 1));
    doc.sentences.push_back(make_sentence({"d", "e"}, 2));
    doc.sentences.push_back(make_sentence({"f", "g", "h"}, 3));
    return doc;
}

Vocab tiny_vocab() {
    return Vocab({"a", "b", "c", "d", "e", "f", "g", "h"}, 4);
}

ModelConfig tiny_cfg(const Vocab& v, unsigned long long seed) {
    ModelConfig cfg;
    cfg.vocab_size = v.size();
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.n_layers = 1;
    cfg.ffn_dim = 32;
    cfg.max_positions = 48;
    cfg.max_sentences = v.max_sentences();
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("synthetic corpus obeys its construction contract") {
    SyntheticCorpus all_ext = make_synthetic_corpus(3, 50, 1.0);
    CHECK(all_ext.pairs.size() == 50);
    for (const LabeledPair& pair : all_ext.pairs) {
        REQUIRE(pair.summary.size() == 2);
        for (const LabeledSentence& ls : pair.summary) {
            CHECK(ls.label.kind == StyleKind::Ext);
            CHECK(ls.label.source_index >= 1);
            CHECK(ls.label.source_index <=
                  static_cast<int>(pair.doc.sentences.size()));
        }
        CHECK(pair.summary[0].label.source_index != pair.summary[1].label.source_index);
    }

    SyntheticCorpus mixed = make_synthetic_corpus(4, 1000, 0.5);
    long long ext = 0, total = 0;
    for (const LabeledPair& pair : mixed.pairs)
        for (const LabeledSentence& ls : pair.summary) {
            ++total;
            if (ls.label.kind == StyleKind::Ext) ++ext;
        }
    double fraction = static_cast<double>(ext) / static_cast<double>(total);
    CHECK(fraction > 0.45);
    CHECK(fraction < 0.55);

    CHECK_THROWS_AS(make_synthetic_corpus(1, 10, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(make_synthetic_corpus(1, -1, 0.5), std::invalid_argument);
}

TEST_CASE("synthetic fusion indices separate the styles completely") {
    SyntheticCorpus corpus = make_synthetic_corpus(9, 100, 0.5);
    double max_ext = -1.0, min_abs = 2.0;
    bool saw_ext = false, saw_abs = false;
    for (const LabeledPair& pair : corpus.pairs)
        for (const LabeledSentence& ls : pair.summary) {
            if (ls.label.kind == StyleKind::Ext) {
                saw_ext = true;
                CHECK(ls.scores.fusion_index == 0.0);
                max_ext = std::max(max_ext, ls.scores.fusion_index);
                CHECK(ls.scores.best_match_index == ls.label.source_index);
            } else {
                saw_abs = true;
                CHECK(ls.scores.fusion_index >= 2.0 / 3.0 - 1e-12);
                min_abs = std::min(min_abs, ls.scores.fusion_index);
            }
        }
    REQUIRE(saw_ext);
    REQUIRE(saw_abs);
    CHECK(max_ext < min_abs);

    // Any threshold below 2/3 recovers the construction labels exactly.
    OracleConfig oracle;
    oracle.gamma = 0.5;
    for (std::size_t i = 0; i < 50; ++i) {
        const LabeledPair& pair = corpus.pairs[i];
        std::vector<Sentence> sentences;
        for (const LabeledSentence& ls : pair.summary) sentences.push_back(ls.sentence);
        LabeledPair relabeled = label_pair(pair.doc, sentences, oracle);
        for (std::size_t j = 0; j < pair.summary.size(); ++j) {
            CHECK(relabeled.summary[j].label.kind == pair.summary[j].label.kind);
            if (pair.summary[j].label.kind == StyleKind::Ext)
                CHECK(relabeled.summary[j].label.source_index ==
                      pair.summary[j].label.source_index);
        }
    }
}

TEST_CASE("synthetic documents fit the model capacities") {
    SyntheticCorpus corpus = make_synthetic_corpus(12, 200, 0.5);
    for (const LabeledPair& pair : corpus.pairs) {
        TaggedSequence doc_seq = serialize_document(pair.doc, corpus.vocab);
        TaggedSequence sum_seq = serialize_summary(pair, corpus.vocab);
        CHECK(doc_seq.size() <= 64);
        CHECK(sum_seq.size() + 1 <= 32);
        CHECK(pair.doc.sentences.size() >= 2);
        CHECK(pair.doc.sentences.size() <= 6);
    }
}

TEST_CASE("pre-finetune freezes the backbone bit for bit") {
    SyntheticCorpus corpus = make_synthetic_corpus(21, 8, 0.5);
    Model m(corpus_cfg(corpus.vocab, 2));
    std::vector<ModelExample> examples = full_examples(corpus);

    std::vector<double> before = m.weights();
    std::vector<char> backbone = m.mask_backbone();
    TrainConfig cfg;
    cfg.lr = 0.05;
    cfg.batch_size = 4;
    std::mt19937_64 rng(cfg.seed);
    train_stage(m, examples, TrainStage::PreFinetune, 2, cfg, rng);

    const std::vector<double>& after = m.weights();
    bool adapter_moved = false;
    for (std::size_t i = 0; i < after.size(); ++i) {
        if (backbone[i]) {
            CHECK(std::memcmp(&before[i], &after[i], sizeof(double)) == 0);
        } else if (before[i] != after[i]) {
            adapter_moved = true;
        }
    }
    CHECK(adapter_moved);

    const double* tag = m.tensor("tag_emb");
    for (int j = 0; j < m.cfg().d_model; ++j) CHECK(tag[j] == 0.0);
}

TEST_CASE("tag row 0 survives every stage at exactly zero") {
    SyntheticCorpus corpus = make_synthetic_corpus(22, 8, 0.5);
    Model m(corpus_cfg(corpus.vocab, 3));
    TrainConfig cfg;
    cfg.pretrain_epochs = 1;
    cfg.prefinetune_epochs = 1;
    cfg.joint_epochs = 2;
    cfg.lr = 0.05;
    cfg.batch_size = 4;
    train(m, corpus.pairs, corpus.vocab, cfg);
    const double* tag = m.tensor("tag_emb");
    for (int j = 0; j < m.cfg().d_model; ++j) CHECK(tag[j] == 0.0);
}

TEST_CASE("training is reproducible and the curriculum logs all stages") {
    SyntheticCorpus corpus = make_synthetic_corpus(23, 12, 0.5);
    TrainConfig cfg;
    cfg.pretrain_epochs = 2;
    cfg.prefinetune_epochs = 2;
    cfg.joint_epochs = 2;
    cfg.lr = 0.05;
    cfg.batch_size = 4;

    Model a(corpus_cfg(corpus.vocab, 4));
    Model b(corpus_cfg(corpus.vocab, 4));
    std::vector<EpochLog> log_a = train(a, corpus.pairs, corpus.vocab, cfg);
    std::vector<EpochLog> log_b = train(b, corpus.pairs, corpus.vocab, cfg);

    CHECK(a.weights() == b.weights());
    REQUIRE(log_a.size() == 6);
    CHECK(log_a[0].stage == TrainStage::PretrainBase);
    CHECK(log_a[2].stage == TrainStage::PreFinetune);
    CHECK(log_a[4].stage == TrainStage::JointFinetune);
    CHECK(log_a[5].epoch == 2);
    for (std::size_t i = 0; i < log_a.size(); ++i) {
        CHECK(log_a[i].total_loss ==
              doctest::Approx(log_a[i].token_loss + cfg.kappa * log_a[i].style_loss)
                  .epsilon(1e-12));
        CHECK(log_a[i].total_loss == log_b[i].total_loss);
        CHECK(std::isfinite(log_a[i].ident_norm));
        CHECK(log_a[i].tag_norm >= 0.0);
    }
    // The copy task has no style decisions.
    CHECK(log_a[0].style_loss == 0.0);
    CHECK(log_a[2].style_loss > 0.0);
}

TEST_CASE("adapter norms rest during pretraining and climb during pre-finetune") {
    SyntheticCorpus corpus = make_synthetic_corpus(24, 16, 0.5);
    Model m(corpus_cfg(corpus.vocab, 5));
    double ident0 = mean_identifier_norm(m);
    double tag0 = mean_tag_norm(m);
    CHECK(ident0 > 0.0);
    CHECK(tag0 > 0.0);

    std::vector<ModelExample> copies;
    for (const LabeledPair& pair : corpus.pairs)
        for (const Sentence& s : pair.doc.sentences)
            copies.push_back(make_copy_example(s, corpus.vocab));

    TrainConfig cfg;
    cfg.lr = 0.05;
    cfg.batch_size = 8;
    std::mt19937_64 rng(1);
    train_stage(m, copies, TrainStage::PretrainBase, 2, cfg, rng);
    CHECK(mean_identifier_norm(m) == ident0);
    CHECK(mean_tag_norm(m) == tag0);

    std::vector<EpochLog> log = train_stage(m, full_examples(corpus),
                                            TrainStage::PreFinetune, 8, cfg, rng);
    CHECK(mean_identifier_norm(m) > ident0);
    CHECK(log.back().ident_norm == mean_identifier_norm(m));
    CHECK(log.back().tag_norm == mean_tag_norm(m));
}

TEST_CASE("overfitting a 32-example corpus decreases the loss monotonically") {
    SyntheticCorpus corpus = make_synthetic_corpus(25, 32, 0.5);
    Model m(corpus_cfg(corpus.vocab, 6));
    TrainConfig cfg;
    cfg.pretrain_epochs = 5;
    cfg.prefinetune_epochs = 8;
    cfg.joint_epochs = 5;
    cfg.lr = 0.02;
    cfg.batch_size = 8;
    std::vector<EpochLog> log = train(m, corpus.pairs, corpus.vocab, cfg);
    REQUIRE(log.size() == 18);
    for (int e = 1; e < 5; ++e) {
        CHECK(log[e].total_loss < log[e - 1].total_loss);  // pretrain epochs 1..5
    }
    for (int e = 14; e < 18; ++e) {
        CHECK(log[e].total_loss < log[e - 1].total_loss);  // joint epochs 1..5
    }
}

TEST_CASE("divergence raises a training error with context") {
    SyntheticCorpus corpus = make_synthetic_corpus(26, 4, 0.5);
    Model m(corpus_cfg(corpus.vocab, 7));
    double* tok = m.tensor("tok_emb");
    std::fill(tok, tok + m.tensor_info("tok_emb").count(), 1e300);

    TrainConfig cfg;
    std::mt19937_64 rng(1);
    std::vector<ModelExample> examples = full_examples(corpus);
    try {
        train_stage(m, examples, TrainStage::JointFinetune, 1, cfg, rng);
        FAIL("expected TrainingError");
    } catch (const TrainingError& err) {
        CHECK(err.epoch() == 1);
        CHECK(err.batch() == 1);
        CHECK(err.stage() == TrainStage::JointFinetune);
        CHECK(std::string(err.what()).find("joint-finetune") != std::string::npos);
    }
}

TEST_CASE("inference output always parses across a 100-seed sweep") {
    Vocab v = tiny_vocab();
    Document doc = tiny_doc();
    for (unsigned long long seed = 1; seed <= 100; ++seed) {
        Model m(tiny_cfg(v, seed));
        InferResult result = infer(m, doc, v);
        ParseResult reparsed = parse_summary(result.sequence.tokens, v,
                                             static_cast<int>(doc.sentences.size()));
        CHECK(reparsed.ok());
        CHECK(result.styles.size() == result.summary.sentences.size());
        for (std::size_t i = 0; i < result.styles.size(); ++i) {
            CHECK(result.summary.sentences[i].label.kind == result.styles[i].kind);
            if (result.styles[i].kind == StyleKind::Ext)
                CHECK(result.summary.sentences[i].label.source_index ==
                      result.styles[i].source_index);
        }
    }
}

TEST_CASE("inference is deterministic and honors the token budget") {
    Vocab v = tiny_vocab();
    Document doc = tiny_doc();
    Model m(tiny_cfg(v, 42));

    InferResult a = infer(m, doc, v);
    InferResult b = infer(m, doc, v);
    CHECK(a.sequence.tokens == b.sequence.tokens);
    CHECK(a.sequence.group_tags == b.sequence.group_tags);

    InferConfig capped;
    capped.max_output_tokens = 5;
    InferResult short_out = infer(m, doc, v, capped);
    CHECK(short_out.sequence.tokens.size() <= 5);
    CHECK(parse_summary(short_out.sequence.tokens, v, 3).ok());

    capped.max_output_tokens = 2;  // no room for opener + content + closer
    InferResult empty_out = infer(m, doc, v, capped);
    CHECK(empty_out.sequence.tokens.empty());
    CHECK(empty_out.summary.sentences.empty());
}

TEST_CASE("forced styles drive the opener sequence") {
    Vocab v = tiny_vocab();
    Document doc = tiny_doc();
    Model m(tiny_cfg(v, 8));

    InferConfig cfg;
    cfg.forced_styles = {StyleLabel{StyleKind::Ext, 2}, StyleLabel{StyleKind::Abs, 0}};
    InferResult result = infer(m, doc, v, cfg);
    REQUIRE(result.summary.sentences.size() == 2);
    CHECK(result.summary.sentences[0].label.kind == StyleKind::Ext);
    CHECK(result.summary.sentences[0].label.source_index == 2);
    CHECK(result.summary.sentences[1].label.kind == StyleKind::Abs);
    CHECK(result.sequence.tokens[0] == v.sent_start(2));
    CHECK(result.sequence.group_tags[0] == 2);

    cfg.forced_styles = {StyleLabel{StyleKind::Ext, 9}};
    CHECK_THROWS_AS(infer(m, doc, v, cfg), std::invalid_argument);
}

TEST_CASE("checkpoints round-trip bit for bit") {
    Vocab v = tiny_vocab();
    Model m(tiny_cfg(v, 77));
    m.set_alpha(0.73125);

    std::stringstream buffer;
    save_checkpoint(m, v, buffer);
    Checkpoint loaded = load_checkpoint(buffer);

    CHECK(loaded.model.weights() == m.weights());
    CHECK(loaded.model.cfg().d_model == m.cfg().d_model);
    CHECK(loaded.model.cfg().use_positions == m.cfg().use_positions);
    CHECK(loaded.vocab.size() == v.size());
    CHECK(loaded.vocab.content_tokens() == v.content_tokens());
    CHECK(loaded.model.alpha() == 0.73125);
}

TEST_CASE("checkpoint loading validates the header and shapes") {
    Vocab v = tiny_vocab();
    Model m(tiny_cfg(v, 78));
    std::stringstream buffer;
    save_checkpoint(m, v, buffer);
    std::string text = buffer.str();

    {
        std::istringstream bad("not-a-checkpoint 1\n");
        CHECK_THROWS_AS(load_checkpoint(bad), CheckpointError);
    }
    {
        std::istringstream truncated(text.substr(0, text.size() / 2));
        CHECK_THROWS_AS(load_checkpoint(truncated), CheckpointError);
    }
    {
        std::string tampered = text;
        std::string needle = "tensor tok_emb";
        std::size_t at = tampered.find(needle);
        REQUIRE(at != std::string::npos);
        tampered.replace(at, needle.size(), "tensor tok_bad");
        std::istringstream in(tampered);
        CHECK_THROWS_AS(load_checkpoint(in), CheckpointError);
    }
    {
        std::string needle = "tensor alpha 1 1";
        std::string tampered = text;
        std::size_t at = tampered.find(needle);
        REQUIRE(at != std::string::npos);
        tampered.replace(at, needle.size(), "tensor alpha 1 2");
        std::istringstream in(tampered);
        CHECK_THROWS_AS(load_checkpoint(in), CheckpointError);
    }
}
