#pragma once

#include <vector>

#include "sumstyle/model/net.hpp"

namespace sumstyle {

struct InferConfig {
    // 0 means "as many as the decoder window allows".
    int max_output_tokens = 0;
    // When non-empty, boundary decisions consume this list instead of the
    // pointer, and decoding stops once it is exhausted.
    std::vector<StyleLabel> forced_styles;
};

struct InferResult {
    TaggedSequence sequence;          // emitted tokens with their group tags
    ParsedSummary summary;            // grammar view of `sequence`
    std::vector<StyleLabel> styles;   // pointer choice per emitted sentence
};

// Greedy autoregressive decoding. At a sentence boundary the token head,
// restricted to <eos> and the valid openers, decides whether to continue;
// the pointer then picks the style. Content steps are masked to content
// tokens plus </S>, with </S> barred right after an opener, so the output
// always parses.
InferResult infer(const Model& m, const Document& doc, const Vocab& vocab,
                  const InferConfig& cfg = {});

}  // namespace sumstyle
