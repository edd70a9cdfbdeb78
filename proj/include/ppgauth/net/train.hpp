#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppgauth/net/data.hpp"
#include "ppgauth/net/model.hpp"

namespace ppgauth::net {

struct TrainConfig {
    double learning_rate = 1e-4;
    int epochs = 100;
    int batch_size = 5;
    int early_stop_patience = 10;
    /// Batches drawn per epoch.
    int steps_per_epoch = 40;
    /// Size of the fixed validation pair set scored after every epoch.
    int val_pairs = 100;
    std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);
nlohmann::json to_json(const TrainConfig& config);
/// Unknown keys are rejected with ConfigError.
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Bias-corrected Adam over the trainable records of a parameter list.
template <class T>
class Adam {
public:
    explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(eps) {}

    void step(const std::vector<Param<T>*>& params);
    long steps() const { return t_; }

private:
    double lr_, b1_, b2_, eps_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

extern template class Adam<float>;
extern template class Adam<double>;

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    bool stopped_early = false;
};

/// JSON array of {epoch, train_loss, val_loss}.
nlohmann::json history_json(const TrainHistory& history);

/// Mean loss of the model on a fixed pair set, inference mode.
double pair_loss(const SiameseModel& model, const PairBatch& pairs);
/// Inference-mode scores of a pair set, evaluated in chunks.
std::vector<double> pair_scores(const SiameseModel& model, const PairBatch& pairs);

/// Adam on batch-mean cross-entropy, validation loss after every epoch,
/// early stopping with the best epoch's weights restored. Throws
/// TrainingError naming the epoch when the loss stops being finite.
TrainHistory train(SiameseModel& model, const SegmentDataset& train_data, const SegmentDataset& val_data,
                   const ImageSpec& spec, const TrainConfig& config,
                   const std::function<void(const EpochRecord&)>& on_epoch = {});

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t sampled = 0;
    /// Draws discarded because w +- h changed the branch pattern.
    std::size_t rejected = 0;
    /// Layer kinds touched: conv, batchnorm, residual, dense.
    std::set<std::string> kinds;
};

/// Analytic gradients of the batch loss against central differences (step
/// 1e-3) in double precision, on random inputs. Up to `per_record` entries
/// of every trainable record are sampled; a draw whose perturbation flips a
/// ReLU, pooling winner or |.| sign is discarded, since the difference
/// quotient straddles a kink there. Relative error is
/// |a - n| / max(|a|, |n|, 1e-6).
GradCheckResult grad_check(const ModelConfig& config, std::uint64_t seed, std::size_t per_record = 2);

}  // namespace ppgauth::net
