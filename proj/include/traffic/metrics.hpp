#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace traffic {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t classes = 0) : classes_(classes), counts_(classes * classes, 0) {}

    std::size_t classes() const { return classes_; }
    std::size_t& at(std::size_t truth, std::size_t predicted) { return counts_[truth * classes_ + predicted]; }
    std::size_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * classes_ + predicted]; }

    std::size_t total() const;
    std::size_t trace() const;
    std::size_t row_sum(std::size_t truth) const;
    std::size_t column_sum(std::size_t predicted) const;

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t classes_;
    std::vector<std::size_t> counts_;
};

struct ClassScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct MetricsReport {
    ConfusionMatrix confusion;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double top2_accuracy = 0.0;
    std::vector<ClassScores> per_class;
};

/// Index of the largest value; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

/// Indices of the two largest values (ties to the lower index). With one class both entries are 0.
std::pair<std::size_t, std::size_t> top_two(std::span<const double> values);

/// Scores probability vectors against true class indices.
///
/// Macro-F1 averages the per-class F1 over classes that occur in `truths`;
/// a class with precision + recall = 0 scores F1 = 0. Each prediction must be
/// a distribution (non-negative, summing to 1 within 1e-6).
MetricsReport evaluate(const std::vector<std::vector<double>>& predictions, std::span<const std::size_t> truths);

struct MetricSummary {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation, 0 for a single run
};

struct AggregateReport {
    std::size_t runs = 0;
    MetricSummary accuracy;
    MetricSummary macro_f1;
    MetricSummary top2_accuracy;
};

AggregateReport aggregate_runs(std::span<const MetricsReport> reports);

/// Structured text (JSON) with fixed field names.
std::string report_to_json(const MetricsReport& report);

struct TableRow {
    std::string name;
    double accuracy;
    double macro_f1;
    double top2_accuracy;
};

/// Aligned "Classifier | Accuracy | F1 | Top 2 Accuracy" table with values in percent.
std::string render_metrics_table(std::span<const TableRow> rows);
std::string render_metrics_csv(std::span<const TableRow> rows);

}  // namespace traffic
