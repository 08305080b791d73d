#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sumstyle/labeler.hpp"
#include "sumstyle/text.hpp"

namespace sumstyle {

class CapacityError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Token-id vocabulary. Content ids come first, identifier ids occupy a
// reserved contiguous range at the top:
//
//   0         <bos>   decoder start (model-side, never serialized)
//   1         <eos>   sequence end
//   2         <unk>   unseen content token
//   3..       content tokens, in construction order
//   top       <S> </S> <S_1> .. <S_max>
class Vocab {
  public:
    Vocab(std::vector<std::string> content_tokens, int max_sentences);

    int size() const { return static_cast<int>(surfaces_.size()); }
    int max_sentences() const { return max_sentences_; }

    int bos() const { return 0; }
    int eos() const { return 1; }
    int unk() const { return 2; }
    int identifier_base() const { return identifier_base_; }
    int doc_start() const { return identifier_base_; }      // <S>
    int sent_end() const { return identifier_base_ + 1; }   // </S>
    int sent_start(int k) const;                             // <S_k>

    bool is_identifier(int id) const { return id >= identifier_base_ && id < size(); }
    bool is_sent_start(int id) const { return id >= identifier_base_ + 2 && id < size(); }
    // k for <S_k>; throws if id is not a sentence-start identifier.
    int sent_start_k(int id) const;
    bool is_content(int id) const { return id >= 3 && id < identifier_base_; }

    // Unknown surfaces map to unk().
    int id_of(const std::string& token) const;
    const std::string& surface(int id) const;

    const std::vector<std::string>& content_tokens() const { return content_tokens_; }

  private:
    std::vector<std::string> content_tokens_;
    std::vector<std::string> surfaces_;
    std::unordered_map<std::string, int> ids_;
    int max_sentences_ = 0;
    int identifier_base_ = 0;
};

// Token ids paired with their group tags: tokens of sentence k carry tag k,
// generator-path tokens carry tag 0.
struct TaggedSequence {
    std::vector<int> tokens;
    std::vector<int> group_tags;

    std::size_t size() const { return tokens.size(); }
};

struct ParsedSentence {
    StyleLabel label;
    std::vector<Token> tokens;
};

struct ParsedSummary {
    std::vector<ParsedSentence> sentences;
};

enum class ParseErrorKind {
    None,
    UnexpectedIdentifier,
    UnterminatedSentence,
    EmptySentence,
    UnknownSentenceIndex,
};

struct ParseError {
    ParseErrorKind kind = ParseErrorKind::None;
    std::size_t position = 0;  // 1-based token position of the first violation
    std::string message;
};

struct ParseResult {
    ParsedSummary summary;
    ParseError error;

    bool ok() const { return error.kind == ParseErrorKind::None; }
};

// `<S> <S_1> tokens.. </S> <S_2> tokens.. </S> ..` with the leading <S>
// tagged 0 and each sentence block (opener, tokens, closer) tagged k.
// Throws CapacityError when the document exceeds max_sentences.
TaggedSequence serialize_document(const Document& doc, const Vocab& vocab);

// Ext(k) sentences open with <S_k> and carry tag k; Abs sentences open with
// <S> and carry tag 0. Throws std::invalid_argument on a bad source index.
TaggedSequence serialize_summary(const LabeledPair& pair, const Vocab& vocab);

// Parses `( (<S_k>|<S>) content* </S> )*`, validating sentence indices against
// the paired document's sentence count.
ParseResult parse_summary(const std::vector<int>& tokens, const Vocab& vocab,
                          int doc_sentence_count);

// Inverse of serialize_document; throws std::invalid_argument on malformed input.
Document parse_document(const TaggedSequence& seq, const Vocab& vocab,
                        const std::string& id = "doc");

}  // namespace sumstyle
