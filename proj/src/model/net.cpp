#include "sumstyle/model/net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sumstyle {

namespace {

constexpr double kLnEps = 1e-5;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_grad(double x) {
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))) +
           x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

// C[n×p] = A[n×m]·B[m×p], optionally accumulating.
void mm(const double* a, const double* b, double* c, int n, int m, int p, bool acc) {
    for (int i = 0; i < n; ++i) {
        double* crow = c + static_cast<std::size_t>(i) * p;
        if (!acc) std::fill(crow, crow + p, 0.0);
        const double* arow = a + static_cast<std::size_t>(i) * m;
        for (int t = 0; t < m; ++t) {
            double av = arow[t];
            if (av == 0.0) continue;
            const double* brow = b + static_cast<std::size_t>(t) * p;
            for (int j = 0; j < p; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[n×p] = A[n×m]·B[p×m]ᵀ, optionally accumulating.
void mm_bt(const double* a, const double* b, double* c, int n, int m, int p, bool acc) {
    for (int i = 0; i < n; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * m;
        double* crow = c + static_cast<std::size_t>(i) * p;
        for (int j = 0; j < p; ++j) {
            const double* brow = b + static_cast<std::size_t>(j) * m;
            double sum = 0.0;
            for (int t = 0; t < m; ++t) sum += arow[t] * brow[t];
            crow[j] = acc ? crow[j] + sum : sum;
        }
    }
}

// C[m×p] += A[n×m]ᵀ·B[n×p].
void mm_at_acc(const double* a, const double* b, double* c, int n, int m, int p) {
    for (int i = 0; i < n; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * m;
        const double* brow = b + static_cast<std::size_t>(i) * p;
        for (int t = 0; t < m; ++t) {
            double av = arow[t];
            if (av == 0.0) continue;
            double* crow = c + static_cast<std::size_t>(t) * p;
            for (int j = 0; j < p; ++j) crow[j] += av * brow[j];
        }
    }
}

void softmax_row(double* row, int n) {
    double mx = row[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, row[i]);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        row[i] = std::exp(row[i] - mx);
        sum += row[i];
    }
    for (int i = 0; i < n; ++i) row[i] /= sum;
}

void layernorm_forward(const std::vector<double>& in, const double* g, const double* b,
                       int n, int d, LayerNormTrace& trace) {
    trace.in = in;
    trace.mean.assign(n, 0.0);
    trace.rstd.assign(n, 0.0);
    trace.out.assign(in.size(), 0.0);
    for (int i = 0; i < n; ++i) {
        const double* x = in.data() + static_cast<std::size_t>(i) * d;
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += x[j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) var += (x[j] - mean) * (x[j] - mean);
        var /= d;
        double rstd = 1.0 / std::sqrt(var + kLnEps);
        trace.mean[i] = mean;
        trace.rstd[i] = rstd;
        double* y = trace.out.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) y[j] = g[j] * (x[j] - mean) * rstd + b[j];
    }
}

// d_in accumulates; d_g/d_b accumulate into the grad arena.
void layernorm_backward(const LayerNormTrace& trace, const double* g,
                        const std::vector<double>& d_out, int n, int d,
                        std::vector<double>& d_in, double* d_g, double* d_b) {
    for (int i = 0; i < n; ++i) {
        const double* x = trace.in.data() + static_cast<std::size_t>(i) * d;
        const double* dy = d_out.data() + static_cast<std::size_t>(i) * d;
        double* dx = d_in.data() + static_cast<std::size_t>(i) * d;
        double mean = trace.mean[i];
        double rstd = trace.rstd[i];

        double sum_dyg = 0.0, sum_dyg_xhat = 0.0;
        for (int j = 0; j < d; ++j) {
            double xhat = (x[j] - mean) * rstd;
            double dyg = dy[j] * g[j];
            sum_dyg += dyg;
            sum_dyg_xhat += dyg * xhat;
            d_g[j] += dy[j] * xhat;
            d_b[j] += dy[j];
        }
        for (int j = 0; j < d; ++j) {
            double xhat = (x[j] - mean) * rstd;
            double dyg = dy[j] * g[j];
            dx[j] += rstd * (dyg - sum_dyg / d - xhat * sum_dyg_xhat / d);
        }
    }
}

struct AttnWeights {
    const double* wq;
    const double* wk;
    const double* wv;
    const double* wo;
};

struct AttnGrads {
    double* wq;
    double* wk;
    double* wv;
    double* wo;
};

// xq: n×d queries; xkv: m×d keys/values. Causal masking applies j <= i.
void attention_forward(const AttnWeights& w, const std::vector<double>& xq,
                       const std::vector<double>& xkv, int n, int m, int d, int heads,
                       bool causal, AttnTrace& trace) {
    int dh = d / heads;
    double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    trace.q.assign(static_cast<std::size_t>(n) * d, 0.0);
    trace.k.assign(static_cast<std::size_t>(m) * d, 0.0);
    trace.v.assign(static_cast<std::size_t>(m) * d, 0.0);
    mm(xq.data(), w.wq, trace.q.data(), n, d, d, false);
    mm(xkv.data(), w.wk, trace.k.data(), m, d, d, false);
    mm(xkv.data(), w.wv, trace.v.data(), m, d, d, false);

    trace.probs.assign(static_cast<std::size_t>(heads) * n * m, 0.0);
    trace.concat.assign(static_cast<std::size_t>(n) * d, 0.0);
    for (int h = 0; h < heads; ++h) {
        int off = h * dh;
        for (int i = 0; i < n; ++i) {
            double* prow =
                trace.probs.data() + (static_cast<std::size_t>(h) * n + i) * m;
            const double* qi = trace.q.data() + static_cast<std::size_t>(i) * d + off;
            int limit = causal ? std::min(i + 1, m) : m;
            for (int j = 0; j < limit; ++j) {
                const double* kj = trace.k.data() + static_cast<std::size_t>(j) * d + off;
                double s = 0.0;
                for (int t = 0; t < dh; ++t) s += qi[t] * kj[t];
                prow[j] = s * scale;
            }
            softmax_row(prow, limit);
            for (int j = limit; j < m; ++j) prow[j] = 0.0;

            double* orow = trace.concat.data() + static_cast<std::size_t>(i) * d + off;
            for (int j = 0; j < limit; ++j) {
                const double* vj = trace.v.data() + static_cast<std::size_t>(j) * d + off;
                double p = prow[j];
                for (int t = 0; t < dh; ++t) orow[t] += p * vj[t];
            }
        }
    }

    trace.out.assign(static_cast<std::size_t>(n) * d, 0.0);
    mm(trace.concat.data(), w.wo, trace.out.data(), n, d, d, false);
}

// d_out: n×d upstream gradient. d_xq / d_xkv accumulate.
void attention_backward(const AttnWeights& w, const AttnGrads& gw,
                        const std::vector<double>& xq, const std::vector<double>& xkv,
                        const AttnTrace& trace, const std::vector<double>& d_out, int n,
                        int m, int d, int heads, bool causal, std::vector<double>& d_xq,
                        std::vector<double>& d_xkv) {
    int dh = d / heads;
    double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<double> d_concat(static_cast<std::size_t>(n) * d, 0.0);
    mm_bt(d_out.data(), w.wo, d_concat.data(), n, d, d, false);
    mm_at_acc(trace.concat.data(), d_out.data(), gw.wo, n, d, d);

    std::vector<double> d_q(static_cast<std::size_t>(n) * d, 0.0);
    std::vector<double> d_k(static_cast<std::size_t>(m) * d, 0.0);
    std::vector<double> d_v(static_cast<std::size_t>(m) * d, 0.0);

    for (int h = 0; h < heads; ++h) {
        int off = h * dh;
        for (int i = 0; i < n; ++i) {
            const double* prow =
                trace.probs.data() + (static_cast<std::size_t>(h) * n + i) * m;
            const double* doh = d_concat.data() + static_cast<std::size_t>(i) * d + off;
            int limit = causal ? std::min(i + 1, m) : m;

            // dP, then softmax backward into dS in one fused pass.
            double dot = 0.0;  // Σ_j dP_j P_j
            for (int j = 0; j < limit; ++j) {
                const double* vj = trace.v.data() + static_cast<std::size_t>(j) * d + off;
                double dp = 0.0;
                for (int t = 0; t < dh; ++t) dp += doh[t] * vj[t];
                dot += dp * prow[j];
            }
            const double* qi = trace.q.data() + static_cast<std::size_t>(i) * d + off;
            double* dqi = d_q.data() + static_cast<std::size_t>(i) * d + off;
            for (int j = 0; j < limit; ++j) {
                const double* vj = trace.v.data() + static_cast<std::size_t>(j) * d + off;
                double dp = 0.0;
                for (int t = 0; t < dh; ++t) dp += doh[t] * vj[t];
                double ds = prow[j] * (dp - dot) * scale;

                const double* kj = trace.k.data() + static_cast<std::size_t>(j) * d + off;
                double* dkj = d_k.data() + static_cast<std::size_t>(j) * d + off;
                double* dvj = d_v.data() + static_cast<std::size_t>(j) * d + off;
                double p = prow[j];
                for (int t = 0; t < dh; ++t) {
                    dqi[t] += ds * kj[t];
                    dkj[t] += ds * qi[t];
                    dvj[t] += p * doh[t];
                }
            }
        }
    }

    mm_bt(d_q.data(), w.wq, d_xq.data(), n, d, d, true);
    mm_at_acc(xq.data(), d_q.data(), gw.wq, n, d, d);
    mm_bt(d_k.data(), w.wk, d_xkv.data(), m, d, d, true);
    mm_at_acc(xkv.data(), d_k.data(), gw.wk, m, d, d);
    mm_bt(d_v.data(), w.wv, d_xkv.data(), m, d, d, true);
    mm_at_acc(xkv.data(), d_v.data(), gw.wv, m, d, d);
}

void ffn_forward(const double* w1, const double* b1, const double* w2, const double* b2,
                 const std::vector<double>& in, int n, int d, int f, FfnTrace& trace) {
    trace.pre.assign(static_cast<std::size_t>(n) * f, 0.0);
    mm(in.data(), w1, trace.pre.data(), n, d, f, false);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < f; ++j) trace.pre[static_cast<std::size_t>(i) * f + j] += b1[j];

    trace.act.assign(trace.pre.size(), 0.0);
    for (std::size_t i = 0; i < trace.pre.size(); ++i) trace.act[i] = gelu(trace.pre[i]);

    trace.out.assign(static_cast<std::size_t>(n) * d, 0.0);
    mm(trace.act.data(), w2, trace.out.data(), n, f, d, false);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) trace.out[static_cast<std::size_t>(i) * d + j] += b2[j];
}

void ffn_backward(const double* w1, const double* w2, const std::vector<double>& in,
                  const FfnTrace& trace, const std::vector<double>& d_out, int n, int d,
                  int f, std::vector<double>& d_in, double* d_w1, double* d_b1,
                  double* d_w2, double* d_b2) {
    std::vector<double> d_act(static_cast<std::size_t>(n) * f, 0.0);
    mm_bt(d_out.data(), w2, d_act.data(), n, d, f, false);
    mm_at_acc(trace.act.data(), d_out.data(), d_w2, n, f, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) d_b2[j] += d_out[static_cast<std::size_t>(i) * d + j];

    std::vector<double> d_pre(d_act.size(), 0.0);
    for (std::size_t i = 0; i < d_act.size(); ++i)
        d_pre[i] = d_act[i] * gelu_grad(trace.pre[i]);

    mm_bt(d_pre.data(), w1, d_in.data(), n, f, d, true);
    mm_at_acc(in.data(), d_pre.data(), d_w1, n, d, f);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < f; ++j) d_b1[j] += d_pre[static_cast<std::size_t>(i) * f + j];
}

std::vector<double> add(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

}  // namespace

Model::Model(ModelConfig cfg) : cfg_(cfg) {
    if (cfg_.vocab_size < cfg_.max_sentences + 2 + 3 + 1)
        throw std::invalid_argument("Model: vocab too small for the identifier block");
    if (cfg_.d_model < 1 || cfg_.n_heads < 1 || cfg_.n_layers < 1 || cfg_.ffn_dim < 1)
        throw std::invalid_argument("Model: dimensions must be positive");
    if (cfg_.d_model % cfg_.n_heads != 0)
        throw std::invalid_argument("Model: d_model must be divisible by n_heads");
    if (cfg_.max_positions < 2 || cfg_.max_sentences < 1)
        throw std::invalid_argument("Model: capacity fields must be positive");

    int d = cfg_.d_model, f = cfg_.ffn_dim;
    register_tensor("tok_emb", cfg_.vocab_size, d);
    register_tensor("pos_emb", cfg_.max_positions, d);
    register_tensor("tag_emb", cfg_.max_sentences + 1, d);
    register_tensor("alpha", 1, 1);
    for (int l = 0; l < cfg_.n_layers; ++l) {
        std::string p = "enc" + std::to_string(l) + ".";
        register_tensor(p + "attn.wq", d, d);
        register_tensor(p + "attn.wk", d, d);
        register_tensor(p + "attn.wv", d, d);
        register_tensor(p + "attn.wo", d, d);
        register_tensor(p + "ln1.g", 1, d);
        register_tensor(p + "ln1.b", 1, d);
        register_tensor(p + "ffn.w1", d, f);
        register_tensor(p + "ffn.b1", 1, f);
        register_tensor(p + "ffn.w2", f, d);
        register_tensor(p + "ffn.b2", 1, d);
        register_tensor(p + "ln2.g", 1, d);
        register_tensor(p + "ln2.b", 1, d);
    }
    for (int l = 0; l < cfg_.n_layers; ++l) {
        std::string p = "dec" + std::to_string(l) + ".";
        register_tensor(p + "self.wq", d, d);
        register_tensor(p + "self.wk", d, d);
        register_tensor(p + "self.wv", d, d);
        register_tensor(p + "self.wo", d, d);
        register_tensor(p + "ln1.g", 1, d);
        register_tensor(p + "ln1.b", 1, d);
        register_tensor(p + "cross.wq", d, d);
        register_tensor(p + "cross.wk", d, d);
        register_tensor(p + "cross.wv", d, d);
        register_tensor(p + "cross.wo", d, d);
        register_tensor(p + "ln2.g", 1, d);
        register_tensor(p + "ln2.b", 1, d);
        register_tensor(p + "ffn.w1", d, f);
        register_tensor(p + "ffn.b1", 1, f);
        register_tensor(p + "ffn.w2", f, d);
        register_tensor(p + "ffn.b2", 1, d);
        register_tensor(p + "ln3.g", 1, d);
        register_tensor(p + "ln3.b", 1, d);
    }

    std::size_t total = 0;
    for (const TensorInfo& t : tensors_) total += t.count();
    weights_.assign(total, 0.0);

    std::mt19937_64 rng(cfg_.seed);
    std::normal_distribution<double> init(0.0, 0.1);
    for (const TensorInfo& t : tensors_) {
        double* w = weights_.data() + t.offset;
        bool is_gain = t.name.size() > 2 && t.name.substr(t.name.size() - 2) == ".g" &&
                       t.name.find("ln") != std::string::npos;
        bool is_bias = (t.name.size() > 2 && t.name.substr(t.name.size() - 2) == ".b") ||
                       t.name.find(".b1") != std::string::npos ||
                       t.name.find(".b2") != std::string::npos;
        if (t.name == "alpha") {
            w[0] = 0.5;
        } else if (is_gain) {
            std::fill(w, w + t.count(), 1.0);
        } else if (is_bias) {
            std::fill(w, w + t.count(), 0.0);
        } else {
            for (std::size_t i = 0; i < t.count(); ++i) w[i] = init(rng);
        }
    }
    // Generator path: group tag 0 contributes nothing, ever.
    std::fill(tensor("tag_emb"), tensor("tag_emb") + cfg_.d_model, 0.0);
}

void Model::register_tensor(const std::string& name, int rows, int cols) {
    std::size_t offset = 0;
    if (!tensors_.empty())
        offset = tensors_.back().offset + tensors_.back().count();
    index_[name] = tensors_.size();
    tensors_.push_back(TensorInfo{name, rows, cols, offset});
}

const TensorInfo& Model::tensor_info(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("Model: unknown tensor " + name);
    return tensors_[it->second];
}

double* Model::tensor(const std::string& name) {
    return weights_.data() + tensor_info(name).offset;
}

const double* Model::tensor(const std::string& name) const {
    return weights_.data() + tensor_info(name).offset;
}

double Model::alpha() const { return *tensor("alpha"); }
void Model::set_alpha(double a) { *tensor("alpha") = a; }

void Model::mark(std::vector<char>& mask, const std::string& name, char value) const {
    const TensorInfo& t = tensor_info(name);
    std::fill(mask.begin() + t.offset, mask.begin() + t.offset + t.count(), value);
}

std::vector<char> Model::mask_all() const {
    std::vector<char> mask(weights_.size(), 1);
    // Pin the generator tag row.
    std::fill(mask.begin() + tensor_info("tag_emb").offset,
              mask.begin() + tensor_info("tag_emb").offset + cfg_.d_model, 0);
    return mask;
}

std::vector<char> Model::mask_adapter() const {
    std::vector<char> mask(weights_.size(), 0);
    const TensorInfo& tok = tensor_info("tok_emb");
    std::size_t ident_begin =
        tok.offset + static_cast<std::size_t>(identifier_base()) * cfg_.d_model;
    std::fill(mask.begin() + ident_begin, mask.begin() + tok.offset + tok.count(), 1);
    const TensorInfo& tag = tensor_info("tag_emb");
    std::fill(mask.begin() + tag.offset + cfg_.d_model,
              mask.begin() + tag.offset + tag.count(), 1);
    mark(mask, "alpha", 1);
    return mask;
}

std::vector<char> Model::mask_backbone() const {
    std::vector<char> all = mask_all();
    std::vector<char> adapter = mask_adapter();
    for (std::size_t i = 0; i < all.size(); ++i)
        if (adapter[i]) all[i] = 0;
    return all;
}

namespace {

void check_sequence(const Model& m, const std::vector<int>& tokens,
                    const std::vector<int>& tags) {
    const ModelConfig& cfg = m.cfg();
    if (tokens.size() != tags.size())
        throw std::invalid_argument("model: token/tag length mismatch");
    if (static_cast<int>(tokens.size()) > cfg.max_positions)
        throw CapacityError("model: sequence of " + std::to_string(tokens.size()) +
                            " exceeds max_positions " + std::to_string(cfg.max_positions));
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] < 0 || tokens[i] >= cfg.vocab_size)
            throw std::invalid_argument("model: token id out of range");
        if (tags[i] < 0 || tags[i] > cfg.max_sentences)
            throw std::invalid_argument("model: group tag out of range");
    }
}

std::vector<double> embed(const Model& m, const std::vector<int>& tokens,
                          const std::vector<int>& tags) {
    int d = m.cfg().d_model;
    const double* tok = m.tensor("tok_emb");
    const double* pos = m.tensor("pos_emb");
    const double* tag = m.tensor("tag_emb");
    std::vector<double> x(tokens.size() * static_cast<std::size_t>(d), 0.0);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        double* row = x.data() + i * d;
        const double* tr = tok + static_cast<std::size_t>(tokens[i]) * d;
        const double* gr = tag + static_cast<std::size_t>(tags[i]) * d;
        for (int j = 0; j < d; ++j) row[j] = tr[j] + gr[j];
        if (m.cfg().use_positions) {
            const double* pr = pos + i * static_cast<std::size_t>(d);
            for (int j = 0; j < d; ++j) row[j] += pr[j];
        }
    }
    return x;
}

void embed_backward(const Model& m, const std::vector<int>& tokens,
                    const std::vector<int>& tags, const std::vector<double>& d_x,
                    std::vector<double>& grad) {
    int d = m.cfg().d_model;
    std::size_t tok_off = m.tensor_info("tok_emb").offset;
    std::size_t pos_off = m.tensor_info("pos_emb").offset;
    std::size_t tag_off = m.tensor_info("tag_emb").offset;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const double* row = d_x.data() + i * d;
        double* tr = grad.data() + tok_off + static_cast<std::size_t>(tokens[i]) * d;
        double* gr = grad.data() + tag_off + static_cast<std::size_t>(tags[i]) * d;
        for (int j = 0; j < d; ++j) {
            tr[j] += row[j];
            gr[j] += row[j];
        }
        if (m.cfg().use_positions) {
            double* pr = grad.data() + pos_off + i * static_cast<std::size_t>(d);
            for (int j = 0; j < d; ++j) pr[j] += row[j];
        }
    }
}

AttnWeights attn_w(const Model& m, const std::string& prefix) {
    return AttnWeights{m.tensor(prefix + ".wq"), m.tensor(prefix + ".wk"),
                       m.tensor(prefix + ".wv"), m.tensor(prefix + ".wo")};
}

AttnGrads attn_g(const Model& m, std::vector<double>& grad, const std::string& prefix) {
    return AttnGrads{grad.data() + m.tensor_info(prefix + ".wq").offset,
                     grad.data() + m.tensor_info(prefix + ".wk").offset,
                     grad.data() + m.tensor_info(prefix + ".wv").offset,
                     grad.data() + m.tensor_info(prefix + ".wo").offset};
}

}  // namespace

EncoderState encode(const Model& m, const TaggedSequence& doc_seq) {
    check_sequence(m, doc_seq.tokens, doc_seq.group_tags);
    if (doc_seq.tokens.empty()) throw std::invalid_argument("encode: empty sequence");

    const ModelConfig& cfg = m.cfg();
    int n = static_cast<int>(doc_seq.tokens.size());
    int d = cfg.d_model;

    EncoderState enc;
    enc.n = n;
    enc.tokens = doc_seq.tokens;
    enc.tags = doc_seq.group_tags;
    enc.x_emb = embed(m, enc.tokens, enc.tags);
    enc.layers.resize(cfg.n_layers);

    std::vector<double> x = enc.x_emb;
    for (int l = 0; l < cfg.n_layers; ++l) {
        EncLayerTrace& tr = enc.layers[l];
        std::string p = "enc" + std::to_string(l);
        tr.in = x;
        attention_forward(attn_w(m, p + ".attn"), x, x, n, n, d, cfg.n_heads, false,
                          tr.attn);
        layernorm_forward(add(x, tr.attn.out), m.tensor(p + ".ln1.g"),
                          m.tensor(p + ".ln1.b"), n, d, tr.ln1);
        ffn_forward(m.tensor(p + ".ffn.w1"), m.tensor(p + ".ffn.b1"),
                    m.tensor(p + ".ffn.w2"), m.tensor(p + ".ffn.b2"), tr.ln1.out, n, d,
                    cfg.ffn_dim, tr.ffn);
        layernorm_forward(add(tr.ln1.out, tr.ffn.out), m.tensor(p + ".ln2.g"),
                          m.tensor(p + ".ln2.b"), n, d, tr.ln2);
        x = tr.ln2.out;
    }
    enc.x_out = x;
    return enc;
}

namespace {

// d_x_out flows back through the encoder stack; d_x_emb_direct carries the
// pointer's direct dependence on the input embeddings.
void encode_backward(const Model& m, const EncoderState& enc,
                     const std::vector<double>& d_x_out,
                     const std::vector<double>& d_x_emb_direct,
                     std::vector<double>& grad) {
    const ModelConfig& cfg = m.cfg();
    int n = enc.n, d = cfg.d_model;

    std::vector<double> d_x = d_x_out;
    for (int l = cfg.n_layers - 1; l >= 0; --l) {
        const EncLayerTrace& tr = enc.layers[l];
        std::string p = "enc" + std::to_string(l);

        // ln2(ln1.out + ffn.out)
        std::vector<double> d_sum2(static_cast<std::size_t>(n) * d, 0.0);
        layernorm_backward(tr.ln2, m.tensor(p + ".ln2.g"), d_x, n, d, d_sum2,
                           grad.data() + m.tensor_info(p + ".ln2.g").offset,
                           grad.data() + m.tensor_info(p + ".ln2.b").offset);

        std::vector<double> d_ln1out = d_sum2;  // residual branch
        ffn_backward(m.tensor(p + ".ffn.w1"), m.tensor(p + ".ffn.w2"), tr.ln1.out,
                     tr.ffn, d_sum2, n, d, cfg.ffn_dim, d_ln1out,
                     grad.data() + m.tensor_info(p + ".ffn.w1").offset,
                     grad.data() + m.tensor_info(p + ".ffn.b1").offset,
                     grad.data() + m.tensor_info(p + ".ffn.w2").offset,
                     grad.data() + m.tensor_info(p + ".ffn.b2").offset);

        // ln1(x + attn.out)
        std::vector<double> d_sum1(static_cast<std::size_t>(n) * d, 0.0);
        layernorm_backward(tr.ln1, m.tensor(p + ".ln1.g"), d_ln1out, n, d, d_sum1,
                           grad.data() + m.tensor_info(p + ".ln1.g").offset,
                           grad.data() + m.tensor_info(p + ".ln1.b").offset);

        std::vector<double> d_in = d_sum1;  // residual branch
        attention_backward(attn_w(m, p + ".attn"), attn_g(m, grad, p + ".attn"), tr.in,
                           tr.in, tr.attn, d_sum1, n, n, d, cfg.n_heads, false, d_in,
                           d_in);
        d_x = std::move(d_in);
    }

    if (!d_x_emb_direct.empty())
        for (std::size_t i = 0; i < d_x.size(); ++i) d_x[i] += d_x_emb_direct[i];
    embed_backward(m, enc.tokens, enc.tags, d_x, grad);
}

}  // namespace

DecoderState decode(const Model& m, const EncoderState& enc,
                    const std::vector<int>& dec_in_tokens,
                    const std::vector<int>& dec_in_tags) {
    check_sequence(m, dec_in_tokens, dec_in_tags);
    if (dec_in_tokens.empty()) throw std::invalid_argument("decode: empty prefix");

    const ModelConfig& cfg = m.cfg();
    int n = static_cast<int>(dec_in_tokens.size());
    int me = enc.n;
    int d = cfg.d_model;

    DecoderState dec;
    dec.n = n;
    dec.tokens = dec_in_tokens;
    dec.tags = dec_in_tags;
    dec.y_emb = embed(m, dec.tokens, dec.tags);
    dec.layers.resize(cfg.n_layers);

    std::vector<double> y = dec.y_emb;
    for (int l = 0; l < cfg.n_layers; ++l) {
        DecLayerTrace& tr = dec.layers[l];
        std::string p = "dec" + std::to_string(l);
        tr.in = y;
        attention_forward(attn_w(m, p + ".self"), y, y, n, n, d, cfg.n_heads, true,
                          tr.self_attn);
        layernorm_forward(add(y, tr.self_attn.out), m.tensor(p + ".ln1.g"),
                          m.tensor(p + ".ln1.b"), n, d, tr.ln1);
        attention_forward(attn_w(m, p + ".cross"), tr.ln1.out, enc.x_out, n, me, d,
                          cfg.n_heads, false, tr.cross_attn);
        layernorm_forward(add(tr.ln1.out, tr.cross_attn.out), m.tensor(p + ".ln2.g"),
                          m.tensor(p + ".ln2.b"), n, d, tr.ln2);
        ffn_forward(m.tensor(p + ".ffn.w1"), m.tensor(p + ".ffn.b1"),
                    m.tensor(p + ".ffn.w2"), m.tensor(p + ".ffn.b2"), tr.ln2.out, n, d,
                    cfg.ffn_dim, tr.ffn);
        layernorm_forward(add(tr.ln2.out, tr.ffn.out), m.tensor(p + ".ln3.g"),
                          m.tensor(p + ".ln3.b"), n, d, tr.ln3);
        y = tr.ln3.out;
    }
    dec.y_out = y;

    // Matched against token embeddings: tied output head.
    dec.token_logits.assign(static_cast<std::size_t>(n) * cfg.vocab_size, 0.0);
    mm_bt(dec.y_out.data(), m.tensor("tok_emb"), dec.token_logits.data(), n, d,
          cfg.vocab_size, false);
    return dec;
}

namespace {

// Backward through the decoder stack. d_token_logits: n×V; d_y_out_extra may
// be empty. Accumulates cross-attention gradients into d_enc_out.
void decode_backward(const Model& m, const EncoderState& enc, const DecoderState& dec,
                     const std::vector<double>& d_token_logits,
                     const std::vector<double>& d_y_out_extra,
                     std::vector<double>& d_enc_out, std::vector<double>& grad) {
    const ModelConfig& cfg = m.cfg();
    int n = dec.n, me = enc.n, d = cfg.d_model, v = cfg.vocab_size;

    std::vector<double> d_y(static_cast<std::size_t>(n) * d, 0.0);
    mm(d_token_logits.data(), m.tensor("tok_emb"), d_y.data(), n, v, d, false);
    mm_at_acc(d_token_logits.data(), dec.y_out.data(),
              grad.data() + m.tensor_info("tok_emb").offset, n, v, d);
    if (!d_y_out_extra.empty())
        for (std::size_t i = 0; i < d_y.size(); ++i) d_y[i] += d_y_out_extra[i];

    for (int l = cfg.n_layers - 1; l >= 0; --l) {
        const DecLayerTrace& tr = dec.layers[l];
        std::string p = "dec" + std::to_string(l);

        std::vector<double> d_sum3(static_cast<std::size_t>(n) * d, 0.0);
        layernorm_backward(tr.ln3, m.tensor(p + ".ln3.g"), d_y, n, d, d_sum3,
                           grad.data() + m.tensor_info(p + ".ln3.g").offset,
                           grad.data() + m.tensor_info(p + ".ln3.b").offset);

        std::vector<double> d_ln2out = d_sum3;
        ffn_backward(m.tensor(p + ".ffn.w1"), m.tensor(p + ".ffn.w2"), tr.ln2.out,
                     tr.ffn, d_sum3, n, d, cfg.ffn_dim, d_ln2out,
                     grad.data() + m.tensor_info(p + ".ffn.w1").offset,
                     grad.data() + m.tensor_info(p + ".ffn.b1").offset,
                     grad.data() + m.tensor_info(p + ".ffn.w2").offset,
                     grad.data() + m.tensor_info(p + ".ffn.b2").offset);

        std::vector<double> d_sum2(static_cast<std::size_t>(n) * d, 0.0);
        layernorm_backward(tr.ln2, m.tensor(p + ".ln2.g"), d_ln2out, n, d, d_sum2,
                           grad.data() + m.tensor_info(p + ".ln2.g").offset,
                           grad.data() + m.tensor_info(p + ".ln2.b").offset);

        std::vector<double> d_ln1out = d_sum2;
        attention_backward(attn_w(m, p + ".cross"), attn_g(m, grad, p + ".cross"),
                           tr.ln1.out, enc.x_out, tr.cross_attn, d_sum2, n, me, d,
                           cfg.n_heads, false, d_ln1out, d_enc_out);

        std::vector<double> d_sum1(static_cast<std::size_t>(n) * d, 0.0);
        layernorm_backward(tr.ln1, m.tensor(p + ".ln1.g"), d_ln1out, n, d, d_sum1,
                           grad.data() + m.tensor_info(p + ".ln1.g").offset,
                           grad.data() + m.tensor_info(p + ".ln1.b").offset);

        std::vector<double> d_in = d_sum1;
        attention_backward(attn_w(m, p + ".self"), attn_g(m, grad, p + ".self"), tr.in,
                           tr.in, tr.self_attn, d_sum1, n, n, d, cfg.n_heads, true, d_in,
                           d_in);
        d_y = std::move(d_in);
    }
    embed_backward(m, dec.tokens, dec.tags, d_y, grad);
}

}  // namespace

PointerDecision style_pointer(const Model& m, const EncoderState& enc,
                              const double* y_out_row,
                              const std::vector<int>& ident_positions) {
    if (ident_positions.empty())
        throw std::invalid_argument("style_pointer: no identifier positions");
    int d = m.cfg().d_model;
    double a = m.alpha();

    PointerDecision out;
    out.logits.resize(ident_positions.size());
    for (std::size_t j = 0; j < ident_positions.size(); ++j) {
        const double* xo = enc.x_out.data() + static_cast<std::size_t>(ident_positions[j]) * d;
        const double* xe = enc.x_emb.data() + static_cast<std::size_t>(ident_positions[j]) * d;
        double s = 0.0;
        for (int t = 0; t < d; ++t) s += y_out_row[t] * (a * xo[t] + (1.0 - a) * xe[t]);
        out.logits[j] = s;
    }
    out.probs = out.logits;
    softmax_row(out.probs.data(), static_cast<int>(out.probs.size()));
    out.argmax = static_cast<int>(
        std::max_element(out.probs.begin(), out.probs.end()) - out.probs.begin());
    return out;
}

namespace {

LossBreakdown batch_loss_impl(const Model& m, const std::vector<ModelExample>& batch,
                              double kappa, std::vector<double>* grad) {
    if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
    const ModelConfig& cfg = m.cfg();
    int d = cfg.d_model, v = cfg.vocab_size;

    long long total_tokens = 0, total_decisions = 0;
    for (const ModelExample& ex : batch) {
        total_tokens += static_cast<long long>(ex.targets.size());
        total_decisions += static_cast<long long>(ex.decision_steps.size());
    }
    if (total_tokens == 0) throw std::invalid_argument("batch_loss: no target tokens");

    double token_scale = 1.0 / static_cast<double>(total_tokens);
    double style_scale =
        total_decisions > 0 ? kappa / static_cast<double>(total_decisions) : 0.0;

    double token_nll = 0.0, style_nll = 0.0;
    for (const ModelExample& ex : batch) {
        EncoderState enc = encode(m, ex.enc);
        DecoderState dec = decode(m, enc, ex.dec_in_tokens, ex.dec_in_tags);
        int n = dec.n;

        std::vector<double> d_logits;
        if (grad) d_logits.assign(static_cast<std::size_t>(n) * v, 0.0);
        std::vector<double> probs(v);
        for (int t = 0; t < n; ++t) {
            const double* row = dec.token_logits.data() + static_cast<std::size_t>(t) * v;
            std::copy(row, row + v, probs.begin());
            softmax_row(probs.data(), v);
            int target = ex.targets[t];
            token_nll += -std::log(probs[target]);
            if (grad) {
                double* drow = d_logits.data() + static_cast<std::size_t>(t) * v;
                for (int j = 0; j < v; ++j) drow[j] = probs[j] * token_scale;
                drow[target] -= token_scale;
            }
        }

        std::vector<double> d_y_extra, d_xout_ptr, d_xemb_ptr;
        double d_alpha = 0.0;
        if (grad && !ex.decision_steps.empty()) {
            d_y_extra.assign(static_cast<std::size_t>(n) * d, 0.0);
            d_xout_ptr.assign(enc.x_out.size(), 0.0);
            d_xemb_ptr.assign(enc.x_emb.size(), 0.0);
        }
        double a = m.alpha();
        for (std::size_t di = 0; di < ex.decision_steps.size(); ++di) {
            int t = ex.decision_steps[di];
            int outcome = ex.decision_outcomes[di];
            const double* y = dec.y_out.data() + static_cast<std::size_t>(t) * d;
            PointerDecision pd = style_pointer(m, enc, y, ex.ident_positions);
            style_nll += -std::log(pd.probs[outcome]);
            if (!grad) continue;

            double* dy = d_y_extra.data() + static_cast<std::size_t>(t) * d;
            for (std::size_t j = 0; j < ex.ident_positions.size(); ++j) {
                double dl = pd.probs[j] * style_scale;
                if (static_cast<int>(j) == outcome) dl -= style_scale;
                std::size_t pos = static_cast<std::size_t>(ex.ident_positions[j]) * d;
                const double* xo = enc.x_out.data() + pos;
                const double* xe = enc.x_emb.data() + pos;
                double* dxo = d_xout_ptr.data() + pos;
                double* dxe = d_xemb_ptr.data() + pos;
                double mix_dot = 0.0;
                for (int c = 0; c < d; ++c) {
                    dy[c] += dl * (a * xo[c] + (1.0 - a) * xe[c]);
                    dxo[c] += dl * a * y[c];
                    dxe[c] += dl * (1.0 - a) * y[c];
                    mix_dot += y[c] * (xo[c] - xe[c]);
                }
                d_alpha += dl * mix_dot;
            }
        }

        if (grad) {
            std::vector<double> d_enc_out(enc.x_out.size(), 0.0);
            decode_backward(m, enc, dec, d_logits, d_y_extra, d_enc_out, *grad);
            if (!d_xout_ptr.empty())
                for (std::size_t i = 0; i < d_enc_out.size(); ++i)
                    d_enc_out[i] += d_xout_ptr[i];
            encode_backward(m, enc, d_enc_out, d_xemb_ptr, *grad);
            (*grad)[m.tensor_info("alpha").offset] += d_alpha;
        }
    }

    LossBreakdown loss;
    loss.kappa = kappa;
    loss.token_count = total_tokens;
    loss.decision_count = total_decisions;
    loss.token_loss = token_nll / static_cast<double>(total_tokens);
    loss.style_loss =
        total_decisions > 0 ? style_nll / static_cast<double>(total_decisions) : 0.0;
    loss.total = loss.token_loss + kappa * loss.style_loss;
    return loss;
}

}  // namespace

LossBreakdown batch_loss(const Model& m, const std::vector<ModelExample>& batch,
                         double kappa) {
    return batch_loss_impl(m, batch, kappa, nullptr);
}

LossBreakdown batch_loss_grad(const Model& m, const std::vector<ModelExample>& batch,
                              double kappa, std::vector<double>& grad) {
    if (grad.size() != m.param_count())
        throw std::invalid_argument("batch_loss_grad: grad arena size mismatch");
    return batch_loss_impl(m, batch, kappa, &grad);
}

ModelExample make_example(const LabeledPair& pair, const Vocab& vocab) {
    ModelExample ex;
    ex.enc = serialize_document(pair.doc, vocab);
    for (std::size_t i = 0; i < ex.enc.tokens.size(); ++i) {
        int id = ex.enc.tokens[i];
        if (id == vocab.doc_start() || vocab.is_sent_start(id))
            ex.ident_positions.push_back(static_cast<int>(i));
    }

    TaggedSequence sum_seq = serialize_summary(pair, vocab);
    ex.dec_in_tokens.push_back(vocab.bos());
    ex.dec_in_tags.push_back(0);
    ex.dec_in_tokens.insert(ex.dec_in_tokens.end(), sum_seq.tokens.begin(),
                            sum_seq.tokens.end());
    ex.dec_in_tags.insert(ex.dec_in_tags.end(), sum_seq.group_tags.begin(),
                          sum_seq.group_tags.end());
    ex.targets = sum_seq.tokens;
    ex.targets.push_back(vocab.eos());

    for (std::size_t t = 0; t < ex.targets.size(); ++t) {
        int id = ex.targets[t];
        if (id == vocab.doc_start()) {
            ex.decision_steps.push_back(static_cast<int>(t));
            ex.decision_outcomes.push_back(0);
        } else if (vocab.is_sent_start(id)) {
            ex.decision_steps.push_back(static_cast<int>(t));
            ex.decision_outcomes.push_back(vocab.sent_start_k(id));
        }
    }
    return ex;
}

ModelExample make_copy_example(const Sentence& sentence, const Vocab& vocab) {
    ModelExample ex;
    for (const Token& t : sentence.tokens) {
        ex.enc.tokens.push_back(vocab.id_of(t));
        ex.enc.group_tags.push_back(0);
    }
    if (ex.enc.tokens.empty())
        throw std::invalid_argument("make_copy_example: empty sentence");
    ex.dec_in_tokens.push_back(vocab.bos());
    ex.dec_in_tags.push_back(0);
    for (int id : ex.enc.tokens) {
        ex.dec_in_tokens.push_back(id);
        ex.dec_in_tags.push_back(0);
        ex.targets.push_back(id);
    }
    ex.targets.push_back(vocab.eos());
    return ex;
}

double gradient_check(Model& m, const std::vector<ModelExample>& batch, double kappa,
                      double epsilon, int n_coords, std::mt19937_64& rng) {
    std::vector<double> grad(m.param_count(), 0.0);
    batch_loss_grad(m, batch, kappa, grad);

    std::vector<char> mask = m.mask_all();
    std::vector<std::size_t> trainable;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) trainable.push_back(i);

    std::vector<std::size_t> coords;
    coords.push_back(m.tensor_info("alpha").offset);
    // One coordinate of a nonzero (trainable) group-tag row.
    coords.push_back(m.tensor_info("tag_emb").offset +
                     static_cast<std::size_t>(m.cfg().d_model) +
                     rng() % static_cast<std::size_t>(m.cfg().d_model));
    while (static_cast<int>(coords.size()) < n_coords)
        coords.push_back(trainable[rng() % trainable.size()]);

    double max_rel = 0.0;
    std::vector<double>& w = m.weights();
    for (std::size_t c : coords) {
        double keep = w[c];
        w[c] = keep + epsilon;
        double up = batch_loss(m, batch, kappa).total;
        w[c] = keep - epsilon;
        double down = batch_loss(m, batch, kappa).total;
        w[c] = keep;
        double numeric = (up - down) / (2.0 * epsilon);
        double analytic = grad[c];
        double rel = std::abs(analytic - numeric) /
                     std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace sumstyle
