#pragma once

#include <string>
#include <vector>

#include "bankfuse/bankio.hpp"
#include "bankfuse/fusion.hpp"

namespace bankfuse {

struct TrainConfig {
    int batch_size = 128;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double lr0 = 0.1;
    int epochs = 0;
    std::vector<int> lr_drop_epochs;  // strictly increasing, all < epochs
    double lr_drop_factor = 0.1;
    uint64_t seed = 0;
    double label_fraction = 1.0;  // in (0, 1]
    bool standardize = false;     // frozen per-feature standardization

    void validate() const;
};

/// Flat `key = value` file mirroring TrainConfig; '#' starts a comment,
/// unknown keys are rejected. lr_drop_epochs is a comma list.
TrainConfig load_train_config(const std::string& path);

struct Metrics {
    std::vector<double> epoch_loss;  // mean loss per epoch
    std::vector<double> epoch_lr;
    double accuracy = 0.0;  // top-1
};

/// lr0 * lr_drop_factor^(number of drop epochs <= epoch)
double learning_rate_at(const TrainConfig& cfg, int epoch);

struct SgdState {
    std::vector<Matrix> velocity;  // aligned with parameters()
};

/// g <- grad + wd * param; v <- momentum * v + g; param <- param - lr * v
void sgd_step(const std::vector<ParamRef>& params, const std::vector<Matrix>& grads,
              SgdState& state, double lr, double momentum, double weight_decay);

/// Seeded, per-class shuffled selection of ceil(fraction * class size) sample
/// indices per class, returned in ascending order.
std::vector<size_t> stratified_subsample(const std::vector<int>& labels, int classes,
                                         double fraction, Rng& rng);

/// Mini-batch SGD per the fixed recipe: seeded shuffles each epoch, the last
/// short batch kept, LR dropped by lr_drop_factor at each boundary. Pure in
/// (seed, config, dataset, initial weights); the reported accuracy is over
/// the full supplied dataset.
Metrics train(FusionModel& model, const FeatureBankDataset& data, const TrainConfig& cfg);

/// Top-1 accuracy; ties resolve to the lowest class index. Mutates nothing.
double evaluate(const FusionModel& model, const FeatureBankDataset& data);

/// Metrics file: one `epoch,lr,mean_loss` line per epoch, then `final,<acc>`.
void write_metrics(const Metrics& m, const std::string& path);

struct AblationRow {
    Architecture arch;
    Metrics metrics;
};

/// Trains every architecture variant (SA_ONLY, CA_ONLY, SA2CA, CA2SA, SCA,
/// ADD, CONCAT, SINGLE<i>, SINGLE_SA<i>) with one shared seed and config;
/// 7 + 2N rows in that order. Accuracy is over `eval_data`.
std::vector<AblationRow> run_ablation(const FeatureBankDataset& data,
                                      const FeatureBankDataset& eval_data, const TrainConfig& cfg,
                                      int heads);
void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path);

}  // namespace bankfuse
