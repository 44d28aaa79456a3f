#include "traffic/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace traffic {

std::vector<Ratio> class_weight_ratios(std::span<const std::size_t> counts) {
    if (counts.empty()) throw std::invalid_argument("class weights need at least one class");
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0) {
            throw std::invalid_argument("class " + std::to_string(c) +
                                        " has no examples; merge or drop empty classes before weighting");
        }
    }
    std::vector<std::size_t> sorted(counts.begin(), counts.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    // median = median_num / median_den
    const std::uint64_t median_num = sorted.size() % 2 ? sorted[mid] : sorted[mid - 1] + sorted[mid];
    const std::uint64_t median_den = sorted.size() % 2 ? 1 : 2;

    std::vector<Ratio> out;
    for (std::size_t count : counts) {
        std::uint64_t num = median_num, den = median_den * count;
        const std::uint64_t g = std::gcd(num, den);
        out.push_back({num / g, den / g});
    }
    return out;
}

ClassWeights compute_class_weights(std::span<const std::size_t> counts) {
    ClassWeights w;
    for (const auto& r : class_weight_ratios(counts)) {
        w.alpha.push_back(static_cast<double>(r.numerator) / static_cast<double>(r.denominator));
    }
    return w;
}

LossResult weighted_cross_entropy(const Tensor& probs, std::size_t true_class, const ClassWeights& weights) {
    if (probs.rank() != 1) throw std::invalid_argument("cross entropy expects a probability vector");
    if (true_class >= probs.size()) {
        throw std::invalid_argument("true class " + std::to_string(true_class) + " out of range for " +
                                    std::to_string(probs.size()) + " classes");
    }
    if (weights.size() != probs.size()) {
        throw std::invalid_argument("class weights cover " + std::to_string(weights.size()) + " classes, model has " +
                                    std::to_string(probs.size()));
    }
    const double alpha = weights[true_class];
    LossResult r{-alpha * std::log(probs[true_class] + kLogEpsilon), probs};
    r.grad_logits[true_class] -= 1.0;
    for (double& g : r.grad_logits.values()) g *= alpha;
    return r;
}

}  // namespace traffic
