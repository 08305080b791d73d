#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "sumstyle/seqformat.hpp"

namespace sumstyle {

struct ModelConfig {
    int vocab_size = 0;   // includes the reserved identifier block at the top
    int d_model = 64;
    int n_heads = 4;
    int n_layers = 2;
    int ffn_dim = 128;
    int max_positions = 160;
    int max_sentences = 8;
    unsigned long long seed = 1;
    // Test hook: drop position embeddings so the encoder is permutation-equivariant.
    bool use_positions = true;
};

struct TensorInfo {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::size_t offset = 0;

    std::size_t count() const {
        return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    }
};

// All parameters live in one flat double arena addressed through a named
// tensor registry; gradients and freeze masks reuse the same layout.
class Model {
  public:
    explicit Model(ModelConfig cfg);

    const ModelConfig& cfg() const { return cfg_; }
    std::size_t param_count() const { return weights_.size(); }
    std::vector<double>& weights() { return weights_; }
    const std::vector<double>& weights() const { return weights_; }

    const std::vector<TensorInfo>& tensors() const { return tensors_; }
    const TensorInfo& tensor_info(const std::string& name) const;
    double* tensor(const std::string& name);
    const double* tensor(const std::string& name) const;

    double alpha() const;
    void set_alpha(double a);

    // First identifier id: <S>; then </S>, <S_1>.. (mirrors Vocab's layout).
    int identifier_base() const { return cfg_.vocab_size - (cfg_.max_sentences + 2); }
    int doc_start_id() const { return identifier_base(); }
    int sent_end_id() const { return identifier_base() + 1; }
    int sent_start_id(int k) const { return identifier_base() + 1 + k; }

    // Trainable-coordinate masks. Group-tag row 0 is excluded from every mask.
    std::vector<char> mask_backbone() const;  // stage 1: everything but the adapters
    std::vector<char> mask_adapter() const;   // stage 2: identifier rows, tag rows >= 1, alpha
    std::vector<char> mask_all() const;       // stage 3

  private:
    void register_tensor(const std::string& name, int rows, int cols);
    void mark(std::vector<char>& mask, const std::string& name, char value) const;

    ModelConfig cfg_;
    std::vector<double> weights_;
    std::vector<TensorInfo> tensors_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Per-layer activation record kept for the backward pass and for inspection.
struct AttnTrace {
    std::vector<double> q, k, v;      // n×d / m×d / m×d
    std::vector<double> probs;        // n_heads × n × m softmax rows
    std::vector<double> concat;       // n×d pre-output-projection
    std::vector<double> out;          // n×d
};

struct LayerNormTrace {
    std::vector<double> in;          // residual sum entering the norm
    std::vector<double> mean, rstd;  // per row
    std::vector<double> out;
};

struct FfnTrace {
    std::vector<double> pre;  // n×ffn_dim before activation
    std::vector<double> act;  // after GELU
    std::vector<double> out;
};

struct EncLayerTrace {
    std::vector<double> in;
    AttnTrace attn;
    LayerNormTrace ln1;
    FfnTrace ffn;
    LayerNormTrace ln2;
};

struct EncoderState {
    int n = 0;
    std::vector<int> tokens, tags;
    std::vector<double> x_emb;  // n×d_model input embeddings
    std::vector<double> x_out;  // n×d_model final layer output
    std::vector<EncLayerTrace> layers;
};

struct DecLayerTrace {
    std::vector<double> in;
    AttnTrace self_attn;
    LayerNormTrace ln1;
    AttnTrace cross_attn;
    LayerNormTrace ln2;
    FfnTrace ffn;
    LayerNormTrace ln3;
};

struct DecoderState {
    int n = 0;
    std::vector<int> tokens, tags;      // decoder input (starts with <bos>)
    std::vector<double> y_emb;          // n×d_model
    std::vector<double> y_out;          // n×d_model
    std::vector<double> token_logits;   // n×vocab_size
    std::vector<DecLayerTrace> layers;
};

// Pointer decision over {Abs} ∪ {Ext(k)}: entry 0 is the document-start
// identifier (Abs), entry j >= 1 the opener of sentence j (Ext(j)).
struct PointerDecision {
    std::vector<double> logits;
    std::vector<double> probs;
    int argmax = 0;
};

struct LossBreakdown {
    double token_loss = 0.0;  // nats per target token
    double style_loss = 0.0;  // nats per style decision
    double kappa = 0.0;
    double total = 0.0;       // token_loss + kappa * style_loss
    long long token_count = 0;
    long long decision_count = 0;
};

// One teacher-forced training example, fully precomputed from a labeled pair.
struct ModelExample {
    TaggedSequence enc;                   // serialized document
    std::vector<int> ident_positions;     // encoder positions of <S>, <S_1>, ...
    std::vector<int> dec_in_tokens;       // <bos> + summary tokens
    std::vector<int> dec_in_tags;         // 0 + summary tags
    std::vector<int> targets;             // summary tokens + <eos>
    std::vector<int> decision_steps;      // target positions holding an opener
    std::vector<int> decision_outcomes;   // 0 = Abs, k = Ext(k), per decision
};

ModelExample make_example(const LabeledPair& pair, const Vocab& vocab);

// Identifier-free copy task (the stand-in for generic pretraining): encoder
// sees the bare sentence, the decoder reproduces it and stops.
ModelExample make_copy_example(const Sentence& sentence, const Vocab& vocab);

EncoderState encode(const Model& m, const TaggedSequence& doc_seq);

DecoderState decode(const Model& m, const EncoderState& enc,
                    const std::vector<int>& dec_in_tokens,
                    const std::vector<int>& dec_in_tags);

// Pointer head: mixes final encoder states with input embeddings through
// alpha, dots the decoder state against the mix at identifier positions only.
PointerDecision style_pointer(const Model& m, const EncoderState& enc,
                              const double* y_out_row,
                              const std::vector<int>& ident_positions);

// Mean NLL losses of a batch under teacher forcing (evaluation path).
LossBreakdown batch_loss(const Model& m, const std::vector<ModelExample>& batch,
                         double kappa);

// Same losses plus parameter gradients accumulated into `grad` (arena layout).
LossBreakdown batch_loss_grad(const Model& m, const std::vector<ModelExample>& batch,
                              double kappa, std::vector<double>& grad);

// Central finite differences on sampled trainable coordinates (always alpha
// plus at least one nonzero group-tag row coordinate); returns the max of
// |g_a - g_n| / max(|g_a|, |g_n|, 1e-8).
double gradient_check(Model& m, const std::vector<ModelExample>& batch, double kappa,
                      double epsilon, int n_coords, std::mt19937_64& rng);

}  // namespace sumstyle
