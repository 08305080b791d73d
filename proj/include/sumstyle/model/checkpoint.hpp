#pragma once

#include <iosfwd>
#include <string>

#include "sumstyle/model/net.hpp"

namespace sumstyle {

class CheckpointError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Checkpoint {
    Model model;
    Vocab vocab;
};

// Self-describing text format: a header carrying the format version, the
// model configuration, and the content-token listing with the reserved
// identifier-id range, followed by named tensors with explicit shapes.
// Doubles round-trip exactly (shortest-representation encoding).
void save_checkpoint(const Model& m, const Vocab& vocab, std::ostream& out);
void save_checkpoint(const Model& m, const Vocab& vocab, const std::string& path);

// Validates every tensor name and shape against the header-built registry.
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sumstyle
