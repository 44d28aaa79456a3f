#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "traffic/metrics.hpp"
#include "traffic/training.hpp"

namespace traffic {

struct GridAxis {
    std::string name;
    std::vector<double> values;  // booleans are 0/1
};

struct Grid {
    std::vector<GridAxis> axes;
    std::size_t cap = 1000;

    std::size_t size() const;
    /// Throws on an empty axis, a repeated axis name, or a size over the cap.
    void validate() const;
};

/// One value per axis, in the axis order of the grid.
struct GridPoint {
    std::vector<std::pair<std::string, double>> values;
    std::vector<std::size_t> indices;  // position of each value within its axis

    double get(const std::string& name) const;
    std::string label() const;
};

/// Cartesian product, last axis varying fastest.
std::vector<GridPoint> enumerate_grid(const Grid& grid);

/// Known axes: learning_rate, batch_size, momentum, epochs, augment, class_weighting.
TrainConfig apply_point(TrainConfig base, const GridPoint& point);

enum class SelectionMetric { Accuracy, MacroF1, Top2 };
SelectionMetric parse_selection_metric(const std::string& name);
double metric_value(const MetricsReport& report, SelectionMetric metric);

struct GridRun {
    std::size_t point = 0;
    std::uint64_t seed = 0;
    MetricsReport report;
};

struct GridPointSummary {
    GridPoint point;
    AggregateReport aggregate;
    double score = 0.0;  // mean of the selection metric over seeds
};

struct GridSearchResult {
    std::vector<GridPointSummary> points;  // enumeration order
    std::vector<GridRun> runs;
    std::size_t best = 0;
};

using GridProcedure = std::function<MetricsReport(const GridPoint&, std::uint64_t seed)>;

/// Evaluates every point once per seed and picks the highest mean score.
/// Ties go to the point whose per-axis value indices are smallest when axes are
/// compared by name, so the choice does not depend on how the axes are listed.
GridSearchResult grid_search(const Grid& grid, const GridProcedure& procedure, SelectionMetric metric,
                             const std::vector<std::uint64_t>& seeds);

/// One row per (point, seed) plus one `mean` row per point.
void write_grid_csv(std::ostream& out, const Grid& grid, const GridSearchResult& result);

}  // namespace traffic
