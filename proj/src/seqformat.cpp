#include "sumstyle/seqformat.hpp"

#include <stdexcept>

namespace sumstyle {

Vocab::Vocab(std::vector<std::string> content_tokens, int max_sentences)
    : content_tokens_(std::move(content_tokens)), max_sentences_(max_sentences) {
    if (max_sentences_ < 1) throw std::invalid_argument("Vocab: max_sentences must be >= 1");

    surfaces_.push_back("<bos>");
    surfaces_.push_back("<eos>");
    surfaces_.push_back("<unk>");
    for (const std::string& t : content_tokens_) surfaces_.push_back(t);

    identifier_base_ = static_cast<int>(surfaces_.size());
    surfaces_.push_back("<S>");
    surfaces_.push_back("</S>");
    for (int k = 1; k <= max_sentences_; ++k) {
        surfaces_.push_back("<S_" + std::to_string(k) + ">");
    }

    for (int id = 0; id < size(); ++id) {
        auto [it, inserted] = ids_.emplace(surfaces_[id], id);
        if (!inserted) throw std::invalid_argument("Vocab: duplicate token " + surfaces_[id]);
    }
}

int Vocab::sent_start(int k) const {
    if (k < 1 || k > max_sentences_)
        throw std::invalid_argument("Vocab: sentence index out of range");
    return identifier_base_ + 1 + k;
}

int Vocab::sent_start_k(int id) const {
    if (!is_sent_start(id)) throw std::invalid_argument("Vocab: not a sentence start id");
    return id - identifier_base_ - 1;
}

int Vocab::id_of(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? unk() : it->second;
}

const std::string& Vocab::surface(int id) const {
    if (id < 0 || id >= size()) throw std::invalid_argument("Vocab: id out of range");
    return surfaces_[static_cast<std::size_t>(id)];
}

TaggedSequence serialize_document(const Document& doc, const Vocab& vocab) {
    if (static_cast<int>(doc.sentences.size()) > vocab.max_sentences()) {
        throw CapacityError("serialize_document: document has " +
                            std::to_string(doc.sentences.size()) +
                            " sentences, vocabulary allows " +
                            std::to_string(vocab.max_sentences()));
    }
    TaggedSequence seq;
    seq.tokens.push_back(vocab.doc_start());
    seq.group_tags.push_back(0);
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
        int k = static_cast<int>(i) + 1;
        seq.tokens.push_back(vocab.sent_start(k));
        seq.group_tags.push_back(k);
        for (const Token& t : doc.sentences[i].tokens) {
            seq.tokens.push_back(vocab.id_of(t));
            seq.group_tags.push_back(k);
        }
        seq.tokens.push_back(vocab.sent_end());
        seq.group_tags.push_back(k);
    }
    return seq;
}

TaggedSequence serialize_summary(const LabeledPair& pair, const Vocab& vocab) {
    TaggedSequence seq;
    int doc_len = static_cast<int>(pair.doc.sentences.size());
    for (const LabeledSentence& ls : pair.summary) {
        int tag = 0;
        if (ls.label.kind == StyleKind::Ext) {
            if (ls.label.source_index < 1 || ls.label.source_index > doc_len)
                throw std::invalid_argument("serialize_summary: source index " +
                                            std::to_string(ls.label.source_index) +
                                            " outside document");
            tag = ls.label.source_index;
            seq.tokens.push_back(vocab.sent_start(tag));
        } else {
            seq.tokens.push_back(vocab.doc_start());
        }
        seq.group_tags.push_back(tag);
        for (const Token& t : ls.sentence.tokens) {
            seq.tokens.push_back(vocab.id_of(t));
            seq.group_tags.push_back(tag);
        }
        seq.tokens.push_back(vocab.sent_end());
        seq.group_tags.push_back(tag);
    }
    return seq;
}

ParseResult parse_summary(const std::vector<int>& tokens, const Vocab& vocab,
                          int doc_sentence_count) {
    ParseResult result;
    auto fail = [&](ParseErrorKind kind, std::size_t pos, std::string message) {
        result.error.kind = kind;
        result.error.position = pos;
        result.error.message = std::move(message);
        return result;
    };

    bool in_sentence = false;
    ParsedSentence current;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        std::size_t pos = i + 1;
        int id = tokens[i];
        if (!in_sentence) {
            if (id == vocab.doc_start()) {
                current = ParsedSentence{};
                current.label.kind = StyleKind::Abs;
                in_sentence = true;
            } else if (vocab.is_sent_start(id)) {
                int k = vocab.sent_start_k(id);
                if (k > doc_sentence_count)
                    return fail(ParseErrorKind::UnknownSentenceIndex, pos,
                                "sentence index " + std::to_string(k) +
                                    " beyond document length " +
                                    std::to_string(doc_sentence_count));
                current = ParsedSentence{};
                current.label.kind = StyleKind::Ext;
                current.label.source_index = k;
                in_sentence = true;
            } else {
                return fail(ParseErrorKind::UnexpectedIdentifier, pos,
                            "expected a sentence opener, got " + vocab.surface(id));
            }
        } else {
            if (id == vocab.sent_end()) {
                if (current.tokens.empty())
                    return fail(ParseErrorKind::EmptySentence, pos,
                                "sentence closed without content");
                result.summary.sentences.push_back(std::move(current));
                in_sentence = false;
            } else if (vocab.is_identifier(id) || id == vocab.bos() || id == vocab.eos()) {
                return fail(ParseErrorKind::UnexpectedIdentifier, pos,
                            "identifier " + vocab.surface(id) + " inside a sentence");
            } else {
                current.tokens.push_back(vocab.surface(id));
            }
        }
    }
    if (in_sentence)
        return fail(ParseErrorKind::UnterminatedSentence, tokens.size(),
                    "sequence ended inside a sentence");
    return result;
}

Document parse_document(const TaggedSequence& seq, const Vocab& vocab,
                        const std::string& id) {
    Document doc;
    doc.id = id;
    const std::vector<int>& tokens = seq.tokens;
    if (tokens.empty() || tokens[0] != vocab.doc_start())
        throw std::invalid_argument("parse_document: missing leading <S>");

    std::size_t i = 1;
    while (i < tokens.size()) {
        if (!vocab.is_sent_start(tokens[i]))
            throw std::invalid_argument("parse_document: expected sentence opener at " +
                                        std::to_string(i + 1));
        int k = vocab.sent_start_k(tokens[i]);
        if (k != static_cast<int>(doc.sentences.size()) + 1)
            throw std::invalid_argument("parse_document: non-consecutive sentence index");
        ++i;
        Sentence s;
        s.index = k;
        while (i < tokens.size() && tokens[i] != vocab.sent_end()) {
            if (vocab.is_identifier(tokens[i]))
                throw std::invalid_argument("parse_document: identifier inside sentence");
            s.tokens.push_back(vocab.surface(tokens[i]));
            ++i;
        }
        if (i >= tokens.size())
            throw std::invalid_argument("parse_document: unterminated sentence");
        if (s.tokens.empty()) throw std::invalid_argument("parse_document: empty sentence");
        doc.sentences.push_back(std::move(s));
        ++i;
    }
    if (doc.sentences.empty()) throw std::invalid_argument("parse_document: no sentences");
    return doc;
}

}  // namespace sumstyle
