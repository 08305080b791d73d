#include "sumstyle/model/synthetic.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>
#include <string>

#include "sumstyle/metrics.hpp"

namespace sumstyle {

namespace {

constexpr int kPoolSize = 48;
constexpr int kSummarySentences = 2;
constexpr int kMaxDocSentences = 6;

std::vector<std::string> content_token_list() {
    std::vector<std::string> tokens;
    for (int i = 0; i < kPoolSize; ++i) {
        std::string name = "t";
        if (i < 10) name += "0";
        name += std::to_string(i);
        tokens.push_back(name);
    }
    tokens.push_back("focus1");
    tokens.push_back("focus2");
    tokens.push_back("mark");
    return tokens;
}

}  // namespace

SyntheticCorpus make_synthetic_corpus(unsigned long long seed, int size,
                                      double style_mix) {
    if (size < 0) throw std::invalid_argument("make_synthetic_corpus: negative size");
    if (style_mix < 0.0 || style_mix > 1.0)
        throw std::invalid_argument("make_synthetic_corpus: style_mix outside [0,1]");

    SyntheticCorpus corpus{Vocab(content_token_list(), kMaxDocSentences), {}};
    corpus.pairs.reserve(size);

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> sent_count(2, kMaxDocSentences);
    std::uniform_int_distribution<int> sent_len(3, 6);
    std::bernoulli_distribution is_ext(style_mix);

    std::vector<std::string> pool;
    for (int i = 0; i < kPoolSize; ++i) pool.push_back(corpus.vocab.surface(3 + i));

    for (int di = 0; di < size; ++di) {
        int n = sent_count(rng);
        std::vector<std::string> draw = pool;
        std::shuffle(draw.begin(), draw.end(), rng);

        Document doc;
        doc.id = "syn" + std::to_string(di);
        std::size_t cursor = 0;
        for (int s = 0; s < n; ++s) {
            int len = sent_len(rng);
            std::vector<Token> tokens(draw.begin() + cursor, draw.begin() + cursor + len);
            cursor += len;
            doc.sentences.push_back(make_sentence(std::move(tokens), s + 1));
        }

        bool ext[kSummarySentences];
        for (int j = 0; j < kSummarySentences; ++j) ext[j] = is_ext(rng);

        // Designated source sentences, distinct when both positions are Ext.
        int source[kSummarySentences] = {0, 0};
        if (ext[0]) source[0] = std::uniform_int_distribution<int>(0, n - 1)(rng);
        if (ext[1]) {
            if (ext[0]) {
                int pick = std::uniform_int_distribution<int>(0, n - 2)(rng);
                source[1] = pick >= source[0] ? pick + 1 : pick;
            } else {
                source[1] = std::uniform_int_distribution<int>(0, n - 1)(rng);
            }
        }
        for (int j = 0; j < kSummarySentences; ++j)
            if (ext[j]) {
                std::vector<Token>& tokens = doc.sentences[source[j]].tokens;
                tokens.insert(tokens.begin(), "focus" + std::to_string(j + 1));
            }

        LabeledPair pair;
        pair.doc = doc;
        for (int j = 0; j < kSummarySentences; ++j) {
            LabeledSentence ls;
            if (ext[j]) {
                std::vector<Token> tokens = doc.sentences[source[j]].tokens;
                tokens.push_back("mark");
                ls.sentence = make_sentence(std::move(tokens), j + 1);
                ls.label = StyleLabel{StyleKind::Ext, source[j] + 1};
            } else {
                std::vector<Token> tokens;
                for (const Sentence& s : doc.sentences) tokens.push_back(s.tokens.front());
                ls.sentence = make_sentence(std::move(tokens), j + 1);
                ls.label = StyleLabel{StyleKind::Abs, 0};
            }
            ls.scores = fusion_index(ls.sentence, doc, OracleConfig{}.k);
            pair.summary.push_back(std::move(ls));
        }
        corpus.pairs.push_back(std::move(pair));
    }
    return corpus;
}

}  // namespace sumstyle
