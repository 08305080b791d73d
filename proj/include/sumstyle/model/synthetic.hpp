#pragma once

#include <vector>

#include "sumstyle/seqformat.hpp"

namespace sumstyle {

struct SyntheticCorpus {
    Vocab vocab;
    std::vector<LabeledPair> pairs;
};

// Desk-scale corpus with labels known by construction. Documents are 2-6
// sentences of 3-6 tokens drawn without replacement from a fixed pool, so a
// token appears in at most one sentence per document. Summaries hold exactly
// two sentences, each independently Ext with probability style_mix:
//   Ext at position j: a cue token is prepended to a designated document
//   sentence and the summary copies that sentence plus a fixed marker, so the
//   cued sentence is the unique positive match and the fusion index is 0.
//   Abs: the first token of every document sentence concatenated, which
//   matches every sentence equally and pushes the fusion index to at least
//   2/3 for the shortest summaries.
SyntheticCorpus make_synthetic_corpus(unsigned long long seed, int size,
                                      double style_mix);

}  // namespace sumstyle
