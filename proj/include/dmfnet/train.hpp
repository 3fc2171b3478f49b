#pragma once

// SGD training with the step-down learning-rate policy, confusion-matrix
// evaluation, checkpointing, and the two ablation grids.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dmfnet/checkpoint.hpp"
#include "dmfnet/dataset.hpp"
#include "dmfnet/network.hpp"

namespace dmfnet {

struct TrainConfig {
    float base_lr = 0.01f;
    float gamma = 0.1f;
    double step_fraction = 1.0 / 3.0;
    int epochs = 30;
    int batch_size = 64;
    float momentum = 0.9f;
    float weight_decay = 0.0f;
    uint64_t seed = 0;
};

/// base_lr * gamma^(epoch / floor(step_fraction * epochs)), integer epoch
/// arithmetic; with defaults the drops land at epochs 10 and 20.
float lr_at(const TrainConfig& cfg, int epoch);

/// v <- momentum*v - lr*(g + weight_decay*w); w <- w + v, for every entry of
/// `grads`. Velocity entries are created as zeros on first use.
void sgd_step(ParamBundle& params, const GradBundle& grads, GradBundle& velocity, float lr,
              float momentum, float weight_decay);

/// counts[actual][predicted]; the paper's convention (rows actual, columns
/// predicted, correct results on the diagonal).
struct ConfusionMatrix {
    long counts[2][2] = {{0, 0}, {0, 0}};

    long total() const { return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]; }
    double accuracy() const {
        long t = total();
        return t == 0 ? 0.0 : static_cast<double>(counts[0][0] + counts[1][1]) / t;
    }
    std::string to_text() const;
};

struct EvalResult {
    ConfusionMatrix patch_cm;
    double patch_accuracy = 0.0;
    ConfusionMatrix image_cm;        // majority vote over each source image's patches
    double image_accuracy = 0.0;
};

/// Pure: never touches parameters or running statistics.
EvalResult evaluate(const NetworkGraph& graph, const ParamBundle& params, const PatchSet& data,
                    int batch_size = 64);

struct EpochLog {
    int epoch = 0;
    float lr = 0.0f;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainOutputs {
    std::string best_checkpoint;   // empty: skip writing
    std::string final_checkpoint;
    std::string log_csv;
};

struct TrainResult {
    std::vector<EpochLog> log;
    int best_epoch = 0;            // ties broken by the earlier epoch
    double best_val_accuracy = 0.0;
    ParamBundle final_params;
    ParamBundle best_params;
    double seconds = 0.0;
};

/// epochs x batches of forward/backward/sgd_step with BN in train mode;
/// validation in eval mode after every epoch. Aborts with a diagnostic on a
/// non-finite loss. Log CSV columns: epoch,lr,train_loss,val_accuracy.
TrainResult train(const NetworkGraph& graph, const PatchSet& train_data,
                  const PatchSet& val_data, const TrainConfig& cfg,
                  const TrainOutputs& outputs = {}, const KvMap& checkpoint_extra = {});

struct AblationRow {
    std::string label;
    bool ok = false;
    std::string error;
    double accuracy = 0.0;
    ConfusionMatrix cm;
    long params = 0;
    double seconds = 0.0;
};

struct SplitData {
    PatchSet train;
    PatchSet val;
    uint64_t hash = 0;  // shared-split witness, logged with every row
};

/// Single-branch networks without a preprocessing layer, BRB count 1, 2, 3;
/// identical split and seeds for every row. A failed row carries its error
/// and the grid continues.
std::vector<AblationRow> run_ablation_brb(const SplitData& data, const TrainConfig& cfg);

/// The six dual-branch preprocessing configurations: (none,none), (3,none),
/// (5,none), (3,3), (3,5), (5,5), with two BRBs per branch.
std::vector<AblationRow> run_ablation_prep(const SplitData& data, const TrainConfig& cfg);

std::string ablation_csv(const std::vector<AblationRow>& rows);
std::string ablation_text(const std::vector<AblationRow>& rows, uint64_t split_hash);

}  // namespace dmfnet
