#pragma once

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "sumstyle/model/net.hpp"

namespace sumstyle {

enum class TrainStage { PretrainBase, PreFinetune, JointFinetune };

const char* stage_name(TrainStage stage);

struct TrainConfig {
    int pretrain_epochs = 30;
    int prefinetune_epochs = 8;
    int joint_epochs = 8;
    double lr = 0.1;
    int batch_size = 8;
    double kappa = 1.1;
    unsigned long long seed = 7;
};

struct EpochLog {
    TrainStage stage = TrainStage::PretrainBase;
    int epoch = 0;  // 1-based within the stage
    double token_loss = 0.0;
    double style_loss = 0.0;
    double total_loss = 0.0;
    double ident_norm = 0.0;  // mean L2 of identifier-token embedding rows
    double tag_norm = 0.0;    // mean L2 of group-tag embedding rows >= 1
};

class TrainingError : public std::runtime_error {
  public:
    TrainingError(TrainStage stage, int epoch, int batch, const std::string& what);

    TrainStage stage() const { return stage_; }
    int epoch() const { return epoch_; }
    int batch() const { return batch_; }

  private:
    TrainStage stage_;
    int epoch_;
    int batch_;
};

double mean_identifier_norm(const Model& m);
double mean_tag_norm(const Model& m);

// One stage of fixed-rate SGD. Shuffle order and batch accumulation order are
// fixed by `rng`, so a run is reproducible coordinate for coordinate. Zero
// epochs skips the stage.
std::vector<EpochLog> train_stage(Model& m, const std::vector<ModelExample>& examples,
                                  TrainStage stage, int epochs, const TrainConfig& cfg,
                                  std::mt19937_64& rng);

// Full curriculum: copy-task pretraining without identifiers or tags, adapter
// pre-finetuning with the backbone frozen, then joint finetuning.
std::vector<EpochLog> train(Model& m, const std::vector<LabeledPair>& corpus,
                            const Vocab& vocab, const TrainConfig& cfg);

}  // namespace sumstyle
