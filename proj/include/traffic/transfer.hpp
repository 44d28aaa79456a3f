#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "traffic/training.hpp"

namespace traffic {

inline constexpr int kFeatureFormatVersion = 1;

struct FeatureRow {
    std::string image_id;
    std::size_t label = 0;
    std::vector<double> values;
};

/// Precomputed feature vectors from a frozen extractor.
struct FeatureSet {
    std::size_t feature_dim = 0;
    std::vector<FeatureRow> rows;
};

/// Header `feature_dim=<d>,format_version=1`, then `image_id,label,f_1,...,f_d`.
/// Labels are class names or indices. Errors name the offending line.
FeatureSet read_features(std::istream& in);
FeatureSet load_features(const std::filesystem::path& path);
void write_features(std::ostream& out, const FeatureSet& set);

/// Gaussian clusters around per-class random centres; `separation` scales the
/// centres relative to unit noise.
FeatureSet synthetic_features(const std::vector<std::size_t>& per_class, std::size_t dim, double separation,
                              std::uint64_t seed);

struct HeadParameters {
    Tensor weights;  // [k, d]
    Tensor bias;     // [k]
};

/// Input [d,1,1] -> flatten -> dense k -> softmax.
ModelConfig head_config(std::size_t feature_dim, std::size_t classes);

std::vector<Sample> feature_samples(const FeatureSet& set);

struct HeadTrainResult {
    HeadParameters head;
    TrainResult run;
};

/// Multinomial logistic regression trained with the same SGD loop as the CNN.
/// Every class in [0, classes) must appear among the rows.
HeadTrainResult train_head(const FeatureSet& features, const TrainConfig& cfg, std::size_t classes = 5,
                           const FeatureSet* validation = nullptr);

/// softmax(W f + b)
std::vector<double> predict_head(const HeadParameters& head, const std::vector<double>& features);

MetricsReport evaluate_head(const HeadParameters& head, const FeatureSet& set);

}  // namespace traffic
