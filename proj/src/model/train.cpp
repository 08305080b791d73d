#include "sumstyle/model/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sumstyle {

const char* stage_name(TrainStage stage) {
    switch (stage) {
        case TrainStage::PretrainBase: return "pretrain-base";
        case TrainStage::PreFinetune: return "pre-finetune";
        case TrainStage::JointFinetune: return "joint-finetune";
    }
    return "unknown";
}

TrainingError::TrainingError(TrainStage stage, int epoch, int batch,
                             const std::string& what)
    : std::runtime_error("training diverged at stage " + std::string(stage_name(stage)) +
                         ", epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(batch) + ": " + what),
      stage_(stage),
      epoch_(epoch),
      batch_(batch) {}

namespace {

double mean_row_norm(const Model& m, const std::string& name, int first_row, int rows) {
    const TensorInfo& info = m.tensor_info(name);
    const double* base = m.tensor(name);
    int d = info.cols;
    double sum = 0.0;
    for (int r = first_row; r < first_row + rows; ++r) {
        const double* row = base + static_cast<std::size_t>(r) * d;
        double sq = 0.0;
        for (int j = 0; j < d; ++j) sq += row[j] * row[j];
        sum += std::sqrt(sq);
    }
    return sum / rows;
}

}  // namespace

double mean_identifier_norm(const Model& m) {
    int ident_rows = m.cfg().max_sentences + 2;
    return mean_row_norm(m, "tok_emb", m.identifier_base(), ident_rows);
}

double mean_tag_norm(const Model& m) {
    return mean_row_norm(m, "tag_emb", 1, m.cfg().max_sentences);
}

std::vector<EpochLog> train_stage(Model& m, const std::vector<ModelExample>& examples,
                                  TrainStage stage, int epochs, const TrainConfig& cfg,
                                  std::mt19937_64& rng) {
    if (examples.empty()) throw std::invalid_argument("train_stage: empty corpus");
    if (epochs < 0) throw std::invalid_argument("train_stage: negative epoch count");
    if (cfg.batch_size < 1) throw std::invalid_argument("train_stage: bad batch size");
    if (epochs == 0) return {};  // stage skipped

    std::vector<char> mask;
    switch (stage) {
        case TrainStage::PretrainBase: mask = m.mask_backbone(); break;
        case TrainStage::PreFinetune: mask = m.mask_adapter(); break;
        case TrainStage::JointFinetune: mask = m.mask_all(); break;
    }

    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<EpochLog> log;
    std::vector<double> grad(m.param_count(), 0.0);
    std::vector<double>& w = m.weights();

    for (int epoch = 1; epoch <= epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);

        double token_nll = 0.0, style_nll = 0.0;
        long long tokens = 0, decisions = 0;
        int batch_no = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            ++batch_no;
            std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            std::vector<ModelExample> batch;
            batch.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) batch.push_back(examples[order[i]]);

            std::fill(grad.begin(), grad.end(), 0.0);
            LossBreakdown loss = batch_loss_grad(m, batch, cfg.kappa, grad);
            if (!std::isfinite(loss.total))
                throw TrainingError(stage, epoch, batch_no, "non-finite loss");

            for (std::size_t i = 0; i < w.size(); ++i)
                if (mask[i]) w[i] -= cfg.lr * grad[i];

            token_nll += loss.token_loss * static_cast<double>(loss.token_count);
            style_nll += loss.style_loss * static_cast<double>(loss.decision_count);
            tokens += loss.token_count;
            decisions += loss.decision_count;
        }

        EpochLog entry;
        entry.stage = stage;
        entry.epoch = epoch;
        entry.token_loss = tokens > 0 ? token_nll / static_cast<double>(tokens) : 0.0;
        entry.style_loss =
            decisions > 0 ? style_nll / static_cast<double>(decisions) : 0.0;
        entry.total_loss = entry.token_loss + cfg.kappa * entry.style_loss;
        entry.ident_norm = mean_identifier_norm(m);
        entry.tag_norm = mean_tag_norm(m);
        log.push_back(entry);
    }
    return log;
}

std::vector<EpochLog> train(Model& m, const std::vector<LabeledPair>& corpus,
                            const Vocab& vocab, const TrainConfig& cfg) {
    if (corpus.empty()) throw std::invalid_argument("train: empty corpus");

    std::vector<ModelExample> copy_examples;
    for (const LabeledPair& pair : corpus)
        for (const Sentence& s : pair.doc.sentences)
            copy_examples.push_back(make_copy_example(s, vocab));

    std::vector<ModelExample> full_examples;
    full_examples.reserve(corpus.size());
    for (const LabeledPair& pair : corpus) full_examples.push_back(make_example(pair, vocab));

    std::mt19937_64 rng(cfg.seed);
    std::vector<EpochLog> log = train_stage(m, copy_examples, TrainStage::PretrainBase,
                                            cfg.pretrain_epochs, cfg, rng);
    std::vector<EpochLog> pre = train_stage(m, full_examples, TrainStage::PreFinetune,
                                            cfg.prefinetune_epochs, cfg, rng);
    log.insert(log.end(), pre.begin(), pre.end());
    std::vector<EpochLog> joint = train_stage(m, full_examples, TrainStage::JointFinetune,
                                              cfg.joint_epochs, cfg, rng);
    log.insert(log.end(), joint.begin(), joint.end());
    return log;
}

}  // namespace sumstyle
