#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "traffic/augment.hpp"
#include "traffic/loss.hpp"
#include "traffic/metrics.hpp"
#include "traffic/model.hpp"

namespace traffic {

struct Sample {
    Tensor image;
    std::size_t label = 0;
};

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    bool augment = false;
    AugmentConfig augmentation;
    /// Scale each example's loss by the median-ratio weight of its class.
    bool class_weighting = false;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    std::optional<MetricsReport> validation;
};

struct TrainResult {
    ModelParameters params;
    std::vector<EpochRecord> history;
    /// Set when a batch produced a non-finite loss; `params` then holds the last finite epoch.
    bool diverged = false;
};

/// Called after every epoch; return false to stop early.
using EpochCallback = std::function<bool(const EpochRecord&, const ModelParameters&)>;

/// Epoch callback that keeps the parameters of the best validation epoch and
/// stops after `patience` epochs without improvement.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience, double min_delta = 0.0) : patience_(patience), min_delta_(min_delta) {}
    bool operator()(const EpochRecord& record, const ModelParameters& params);
    EpochCallback callback() { return [this](const EpochRecord& r, const ModelParameters& p) { return (*this)(r, p); }; }
    bool has_best() const { return best_epoch_ > 0; }
    std::size_t best_epoch() const { return best_epoch_; }
    double best_score() const { return best_score_; }
    const ModelParameters& best_params() const { return best_; }

private:
    std::size_t patience_;
    double min_delta_;
    std::size_t best_epoch_ = 0;
    double best_score_ = -1.0;
    ModelParameters best_;
};

/// Mini-batch SGD with momentum on the (optionally class-weighted) cross
/// entropy. Single-threaded and fully determined by `cfg.seed`.
TrainResult train(const Network& net, ModelParameters params, std::span<const Sample> train_set,
                  std::span<const Sample> validation_set, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Predicts every sample and scores the predictions.
MetricsReport evaluate_model(const Network& net, const ModelParameters& params, std::span<const Sample> samples);

struct ExampleGradient {
    double loss = 0.0;
    ParameterGradients gradients;
};

/// Loss and parameter gradients for one example.
ExampleGradient example_gradient(const Network& net, const ModelParameters& params, const Sample& sample,
                                 const ClassWeights& weights);

std::vector<std::size_t> class_counts(std::span<const Sample> samples, std::size_t classes);

/// `epoch,train_loss,val_accuracy,val_macro_f1,val_top2` rows.
void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);

}  // namespace traffic
