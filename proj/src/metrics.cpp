#include "traffic/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace traffic {

std::size_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }

std::size_t ConfusionMatrix::trace() const {
    std::size_t t = 0;
    for (std::size_t c = 0; c < classes_; ++c) t += at(c, c);
    return t;
}

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
    std::size_t s = 0;
    for (std::size_t p = 0; p < classes_; ++p) s += at(truth, p);
    return s;
}

std::size_t ConfusionMatrix::column_sum(std::size_t predicted) const {
    std::size_t s = 0;
    for (std::size_t t = 0; t < classes_; ++t) s += at(t, predicted);
    return s;
}

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

std::pair<std::size_t, std::size_t> top_two(std::span<const double> values) {
    const std::size_t first = argmax(values);
    if (values.size() < 2) return {first, first};
    std::size_t second = first == 0 ? 1 : 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i != first && values[i] > values[second]) second = i;
    }
    return {first, second};
}

MetricsReport evaluate(const std::vector<std::vector<double>>& predictions, std::span<const std::size_t> truths) {
    if (predictions.size() != truths.size()) {
        throw std::invalid_argument("evaluate: " + std::to_string(predictions.size()) + " predictions but " +
                                    std::to_string(truths.size()) + " truths");
    }
    if (predictions.empty()) throw std::invalid_argument("evaluate: no examples");
    const std::size_t k = predictions.front().size();
    if (k == 0) throw std::invalid_argument("evaluate: empty probability vector");

    MetricsReport r;
    r.confusion = ConfusionMatrix(k);
    std::size_t top2_hits = 0;
    for (std::size_t n = 0; n < predictions.size(); ++n) {
        const auto& p = predictions[n];
        if (p.size() != k) {
            throw std::invalid_argument("evaluate: prediction " + std::to_string(n) + " has " +
                                        std::to_string(p.size()) + " classes, expected " + std::to_string(k));
        }
        double sum = 0.0;
        for (double v : p) {
            if (!std::isfinite(v) || v < 0.0) {
                throw std::invalid_argument("evaluate: prediction " + std::to_string(n) + " is not a distribution");
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-6) {
            throw std::invalid_argument("evaluate: prediction " + std::to_string(n) + " sums to " + std::to_string(sum));
        }
        if (truths[n] >= k) {
            throw std::invalid_argument("evaluate: truth " + std::to_string(truths[n]) + " out of range for " +
                                        std::to_string(k) + " classes");
        }
        const auto [first, second] = top_two(p);
        ++r.confusion.at(truths[n], first);
        if (truths[n] == first || truths[n] == second) ++top2_hits;
    }

    const auto total = static_cast<double>(predictions.size());
    r.accuracy = static_cast<double>(r.confusion.trace()) / total;
    r.top2_accuracy = static_cast<double>(top2_hits) / total;

    double f1_sum = 0.0;
    std::size_t present = 0;
    r.per_class.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        auto& s = r.per_class[c];
        const std::size_t tp = r.confusion.at(c, c);
        const std::size_t predicted = r.confusion.column_sum(c);
        s.support = r.confusion.row_sum(c);
        s.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
        s.recall = s.support ? static_cast<double>(tp) / static_cast<double>(s.support) : 0.0;
        // Harmonic mean of precision and recall, written over integer counts.
        const std::size_t denom = s.support + predicted;
        s.f1 = tp ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
        if (s.support) {
            f1_sum += s.f1;
            ++present;
        }
    }
    r.macro_f1 = f1_sum / static_cast<double>(present);
    return r;
}

namespace {
MetricSummary summarize(const std::vector<double>& xs) {
    MetricSummary s;
    const auto n = static_cast<double>(xs.size());
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.stddev = std::sqrt(ss / (n - 1.0));
    }
    return s;
}
}  // namespace

AggregateReport aggregate_runs(std::span<const MetricsReport> reports) {
    if (reports.empty()) throw std::invalid_argument("aggregate_runs: no reports");
    std::vector<double> acc, f1, top2;
    for (const auto& r : reports) {
        acc.push_back(r.accuracy);
        f1.push_back(r.macro_f1);
        top2.push_back(r.top2_accuracy);
    }
    return {reports.size(), summarize(acc), summarize(f1), summarize(top2)};
}

std::string report_to_json(const MetricsReport& report) {
    using nlohmann::json;
    json per_class = json::array();
    for (const auto& s : report.per_class) {
        per_class.push_back({{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}});
    }
    json confusion = json::array();
    for (std::size_t t = 0; t < report.confusion.classes(); ++t) {
        json row = json::array();
        for (std::size_t p = 0; p < report.confusion.classes(); ++p) row.push_back(report.confusion.at(t, p));
        confusion.push_back(row);
    }
    json doc{{"accuracy", report.accuracy},
             {"macro_f1", report.macro_f1},
             {"top2_accuracy", report.top2_accuracy},
             {"per_class", per_class},
             {"confusion", confusion}};
    return doc.dump(2);
}

std::string render_metrics_table(std::span<const TableRow> rows) {
    std::size_t name_width = std::string("Classifier").size();
    for (const auto& r : rows) name_width = std::max(name_width, r.name.size());
    std::ostringstream os;
    char buf[128];
    std::snprintf(buf, sizeof buf, "| %-*s | %8s | %6s | %14s |\n", static_cast<int>(name_width), "Classifier",
                  "Accuracy", "F1", "Top 2 Accuracy");
    os << buf;
    os << "|" << std::string(name_width + 2, '-') << "|----------|--------|----------------|\n";
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "| %-*s | %8.2f | %6.2f | %14.2f |\n", static_cast<int>(name_width),
                      r.name.c_str(), 100.0 * r.accuracy, 100.0 * r.macro_f1, 100.0 * r.top2_accuracy);
        os << buf;
    }
    return os.str();
}

std::string render_metrics_csv(std::span<const TableRow> rows) {
    std::ostringstream os;
    os << "classifier,accuracy,macro_f1,top2_accuracy\n";
    os.precision(17);
    for (const auto& r : rows) os << r.name << ',' << r.accuracy << ',' << r.macro_f1 << ',' << r.top2_accuracy << '\n';
    return os.str();
}

}  // namespace traffic
