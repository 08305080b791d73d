#include "sumstyle/model/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace sumstyle {

namespace {

constexpr int kFormatVersion = 1;

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw CheckpointError("checkpoint: bad numeric literal '" + s + "'");
    return v;
}

std::string next_line(std::istream& in, const char* what) {
    std::string line;
    if (!std::getline(in, line))
        throw CheckpointError(std::string("checkpoint: truncated before ") + what);
    return line;
}

}  // namespace

void save_checkpoint(const Model& m, const Vocab& vocab, std::ostream& out) {
    const ModelConfig& cfg = m.cfg();
    out << "sumstyle-checkpoint " << kFormatVersion << "\n";
    out << "config " << cfg.vocab_size << " " << cfg.d_model << " " << cfg.n_heads << " "
        << cfg.n_layers << " " << cfg.ffn_dim << " " << cfg.max_positions << " "
        << cfg.max_sentences << " " << cfg.seed << " " << (cfg.use_positions ? 1 : 0)
        << "\n";
    out << "identifiers " << vocab.identifier_base() << " " << vocab.size() << "\n";
    out << "content " << vocab.content_tokens().size() << "\n";
    for (const std::string& t : vocab.content_tokens()) out << t << "\n";
    out << "tensors " << m.tensors().size() << "\n";
    for (const TensorInfo& info : m.tensors()) {
        out << "tensor " << info.name << " " << info.rows << " " << info.cols << "\n";
        const double* w = m.weights().data() + info.offset;
        for (int r = 0; r < info.rows; ++r) {
            for (int c = 0; c < info.cols; ++c) {
                if (c) out << " ";
                out << format_double(w[static_cast<std::size_t>(r) * info.cols + c]);
            }
            out << "\n";
        }
    }
    out << "end\n";
    if (!out) throw CheckpointError("checkpoint: write failed");
}

void save_checkpoint(const Model& m, const Vocab& vocab, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw CheckpointError("checkpoint: cannot open " + path + " for writing");
    save_checkpoint(m, vocab, out);
}

Checkpoint load_checkpoint(std::istream& in) {
    std::istringstream header(next_line(in, "magic"));
    std::string magic;
    int version = 0;
    header >> magic >> version;
    if (magic != "sumstyle-checkpoint")
        throw CheckpointError("checkpoint: bad magic '" + magic + "'");
    if (version != kFormatVersion)
        throw CheckpointError("checkpoint: unsupported version " +
                              std::to_string(version));

    ModelConfig cfg;
    {
        std::istringstream line(next_line(in, "config"));
        std::string tag;
        int use_positions = 1;
        line >> tag >> cfg.vocab_size >> cfg.d_model >> cfg.n_heads >> cfg.n_layers >>
            cfg.ffn_dim >> cfg.max_positions >> cfg.max_sentences >> cfg.seed >>
            use_positions;
        if (tag != "config" || !line)
            throw CheckpointError("checkpoint: malformed config line");
        cfg.use_positions = use_positions != 0;
    }

    int identifier_base = 0, declared_size = 0;
    {
        std::istringstream line(next_line(in, "identifiers"));
        std::string tag;
        line >> tag >> identifier_base >> declared_size;
        if (tag != "identifiers" || !line)
            throw CheckpointError("checkpoint: malformed identifiers line");
    }

    std::size_t content_count = 0;
    {
        std::istringstream line(next_line(in, "content"));
        std::string tag;
        line >> tag >> content_count;
        if (tag != "content" || !line)
            throw CheckpointError("checkpoint: malformed content line");
    }
    std::vector<std::string> content;
    content.reserve(content_count);
    for (std::size_t i = 0; i < content_count; ++i)
        content.push_back(next_line(in, "content token"));

    Vocab vocab(content, cfg.max_sentences);
    if (vocab.size() != cfg.vocab_size || vocab.size() != declared_size ||
        vocab.identifier_base() != identifier_base)
        throw CheckpointError("checkpoint: vocabulary does not match the header");

    Model model(cfg);
    if (model.identifier_base() != identifier_base)
        throw CheckpointError("checkpoint: identifier range does not match the model");

    std::size_t tensor_count = 0;
    {
        std::istringstream line(next_line(in, "tensors"));
        std::string tag;
        line >> tag >> tensor_count;
        if (tag != "tensors" || !line)
            throw CheckpointError("checkpoint: malformed tensors line");
    }
    if (tensor_count != model.tensors().size())
        throw CheckpointError("checkpoint: tensor count does not match the config");

    for (std::size_t ti = 0; ti < tensor_count; ++ti) {
        std::istringstream line(next_line(in, "tensor header"));
        std::string tag, name;
        int rows = 0, cols = 0;
        line >> tag >> name >> rows >> cols;
        if (tag != "tensor" || !line)
            throw CheckpointError("checkpoint: malformed tensor header");
        bool known = false;
        for (const TensorInfo& t : model.tensors())
            if (t.name == name) known = true;
        if (!known) throw CheckpointError("checkpoint: unknown tensor " + name);
        const TensorInfo& info = model.tensor_info(name);
        if (info.rows != rows || info.cols != cols)
            throw CheckpointError("checkpoint: shape mismatch for tensor " + name);

        double* w = model.weights().data() + info.offset;
        for (int r = 0; r < rows; ++r) {
            std::istringstream row(next_line(in, "tensor row"));
            for (int c = 0; c < cols; ++c) {
                std::string cell;
                if (!(row >> cell))
                    throw CheckpointError("checkpoint: short row in tensor " + name);
                w[static_cast<std::size_t>(r) * cols + c] = parse_double(cell);
            }
            std::string extra;
            if (row >> extra)
                throw CheckpointError("checkpoint: long row in tensor " + name);
        }
    }

    if (next_line(in, "end marker") != "end")
        throw CheckpointError("checkpoint: missing end marker");
    return Checkpoint{std::move(model), std::move(vocab)};
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CheckpointError("checkpoint: cannot open " + path);
    return load_checkpoint(in);
}

}  // namespace sumstyle
