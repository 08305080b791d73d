#include "sumstyle/model/infer.hpp"

#include <algorithm>
#include <stdexcept>

namespace sumstyle {

namespace {

int argmax_over(const double* logits, const std::vector<int>& allowed) {
    int best = allowed[0];
    for (int id : allowed)
        if (logits[id] > logits[best]) best = id;
    return best;
}

}  // namespace

InferResult infer(const Model& m, const Document& doc, const Vocab& vocab,
                  const InferConfig& cfg) {
    if (cfg.max_output_tokens < 0)
        throw std::invalid_argument("infer: negative token budget");

    TaggedSequence doc_seq = serialize_document(doc, vocab);
    EncoderState enc = encode(m, doc_seq);

    std::vector<int> ident_positions;
    for (std::size_t i = 0; i < doc_seq.tokens.size(); ++i) {
        int id = doc_seq.tokens[i];
        if (id == vocab.doc_start() || vocab.is_sent_start(id))
            ident_positions.push_back(static_cast<int>(i));
    }
    int doc_n = static_cast<int>(doc.sentences.size());

    int budget = m.cfg().max_positions - 1;  // decoder window minus <bos>
    if (cfg.max_output_tokens > 0) budget = std::min(budget, cfg.max_output_tokens);

    const bool forced = !cfg.forced_styles.empty();
    for (const StyleLabel& s : cfg.forced_styles)
        if (s.kind == StyleKind::Ext && (s.source_index < 1 || s.source_index > doc_n))
            throw std::invalid_argument("infer: forced style source out of range");

    std::vector<int> boundary_ids;  // termination-or-open candidates
    boundary_ids.push_back(vocab.eos());
    boundary_ids.push_back(vocab.doc_start());
    for (int k = 1; k <= doc_n; ++k) boundary_ids.push_back(vocab.sent_start(k));

    std::vector<int> content_ids;
    for (int id = 3; id < vocab.identifier_base(); ++id) content_ids.push_back(id);
    if (content_ids.empty()) throw std::invalid_argument("infer: vocab has no content tokens");
    std::vector<int> content_or_close = content_ids;
    content_or_close.push_back(vocab.sent_end());

    InferResult out;
    std::vector<int> dec_tokens{vocab.bos()};
    std::vector<int> dec_tags{0};

    bool at_boundary = true;
    int current_tag = 0;
    bool just_opened = false;
    std::size_t forced_next = 0;

    while (static_cast<int>(out.sequence.tokens.size()) < budget) {
        int emitted = static_cast<int>(out.sequence.tokens.size());
        int remaining = budget - emitted;

        if (at_boundary) {
            // Opener plus at least one content token plus closer must fit.
            if (remaining < 3) break;
            if (forced && forced_next >= cfg.forced_styles.size()) break;

            DecoderState dec = decode(m, enc, dec_tokens, dec_tags);
            const double* logits =
                dec.token_logits.data() +
                static_cast<std::size_t>(dec.n - 1) * m.cfg().vocab_size;
            const double* y = dec.y_out.data() + static_cast<std::size_t>(dec.n - 1) *
                                                     m.cfg().d_model;

            StyleLabel style;
            if (forced) {
                style = cfg.forced_styles[forced_next++];
            } else {
                if (argmax_over(logits, boundary_ids) == vocab.eos()) break;
                PointerDecision pd = style_pointer(m, enc, y, ident_positions);
                if (pd.argmax == 0) {
                    style = StyleLabel{StyleKind::Abs, 0};
                } else {
                    style = StyleLabel{StyleKind::Ext, pd.argmax};
                }
            }

            int opener = style.kind == StyleKind::Abs ? vocab.doc_start()
                                                      : vocab.sent_start(style.source_index);
            current_tag = style.kind == StyleKind::Abs ? 0 : style.source_index;
            out.styles.push_back(style);
            out.sequence.tokens.push_back(opener);
            out.sequence.group_tags.push_back(current_tag);
            dec_tokens.push_back(opener);
            dec_tags.push_back(current_tag);
            at_boundary = false;
            just_opened = true;
            continue;
        }

        // Keep three tokens (opener, content, closer) in reserve for every
        // forced style still waiting, so the whole list fits the budget.
        int pending = forced ? static_cast<int>(cfg.forced_styles.size() - forced_next) : 0;
        int next;
        if (!just_opened && remaining <= 1 + 3 * pending) {
            next = vocab.sent_end();  // budget exhausted: close the sentence
        } else {
            DecoderState dec = decode(m, enc, dec_tokens, dec_tags);
            const double* logits =
                dec.token_logits.data() +
                static_cast<std::size_t>(dec.n - 1) * m.cfg().vocab_size;
            next = argmax_over(logits, just_opened ? content_ids : content_or_close);
        }

        out.sequence.tokens.push_back(next);
        out.sequence.group_tags.push_back(current_tag);
        dec_tokens.push_back(next);
        dec_tags.push_back(current_tag);
        just_opened = false;
        if (next == vocab.sent_end()) at_boundary = true;
    }

    ParseResult parsed = parse_summary(out.sequence.tokens, vocab, doc_n);
    if (!parsed.ok())
        throw std::logic_error("infer: constrained output failed to parse: " +
                               parsed.error.message);
    out.summary = parsed.summary;
    return out;
}

}  // namespace sumstyle
