#include "traffic/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace traffic {

std::size_t Grid::size() const {
    std::size_t n = 1;
    for (const auto& axis : axes) {
        if (axis.values.empty()) return 0;
        if (n > cap) return n;  // already over, avoid overflow
        n *= axis.values.size();
    }
    return n;
}

void Grid::validate() const {
    if (axes.empty()) throw std::invalid_argument("grid has no axes");
    std::set<std::string> names;
    for (const auto& axis : axes) {
        if (axis.values.empty()) throw std::invalid_argument("grid axis '" + axis.name + "' has no values");
        if (!names.insert(axis.name).second) throw std::invalid_argument("grid axis '" + axis.name + "' repeated");
    }
    std::size_t n = 1;
    for (const auto& axis : axes) {
        n *= axis.values.size();
        if (n > cap) {
            std::string dims;
            long double total = 1;
            for (const auto& a : axes) {
                dims += (dims.empty() ? "" : "x") + std::to_string(a.values.size());
                total *= static_cast<long double>(a.values.size());
            }
            std::ostringstream msg;
            msg.precision(20);
            msg << "grid of " << dims << " = " << total << " points exceeds the cap of " << cap;
            throw std::invalid_argument(msg.str());
        }
    }
}

double GridPoint::get(const std::string& name) const {
    for (const auto& [k, v] : values)
        if (k == name) return v;
    throw std::out_of_range("grid point has no axis '" + name + "'");
}

std::string GridPoint::label() const {
    std::ostringstream s;
    for (std::size_t i = 0; i < values.size(); ++i) s << (i ? " " : "") << values[i].first << '=' << values[i].second;
    return s.str();
}

std::vector<GridPoint> enumerate_grid(const Grid& grid) {
    grid.validate();
    std::vector<GridPoint> out;
    std::vector<std::size_t> idx(grid.axes.size(), 0);
    while (true) {
        GridPoint p;
        for (std::size_t a = 0; a < grid.axes.size(); ++a) {
            p.values.emplace_back(grid.axes[a].name, grid.axes[a].values[idx[a]]);
            p.indices.push_back(idx[a]);
        }
        out.push_back(std::move(p));
        std::size_t a = grid.axes.size();
        while (a > 0) {
            --a;
            if (++idx[a] < grid.axes[a].values.size()) break;
            idx[a] = 0;
            if (a == 0) return out;
        }
    }
}

namespace {

std::size_t as_count(double v, const std::string& name) {
    if (!(v >= 1.0) || v != std::floor(v)) throw std::invalid_argument(name + " must be a positive integer");
    return static_cast<std::size_t>(v);
}

// Axis indices ordered by axis name; compared lexicographically for ties.
std::vector<std::size_t> canonical_key(const GridPoint& p) {
    std::map<std::string, std::size_t> by_name;
    for (std::size_t i = 0; i < p.values.size(); ++i) by_name[p.values[i].first] = p.indices[i];
    std::vector<std::size_t> key;
    for (const auto& [name, index] : by_name) key.push_back(index);
    return key;
}

}  // namespace

TrainConfig apply_point(TrainConfig cfg, const GridPoint& point) {
    for (const auto& [name, v] : point.values) {
        if (name == "learning_rate") cfg.learning_rate = v;
        else if (name == "batch_size") cfg.batch_size = as_count(v, name);
        else if (name == "momentum") cfg.momentum = v;
        else if (name == "epochs") cfg.epochs = as_count(v, name);
        else if (name == "augment") cfg.augment = v != 0.0;
        else if (name == "class_weighting") cfg.class_weighting = v != 0.0;
        else throw std::invalid_argument("unknown grid axis '" + name + "'");
    }
    return cfg;
}

SelectionMetric parse_selection_metric(const std::string& name) {
    if (name == "accuracy") return SelectionMetric::Accuracy;
    if (name == "macro_f1") return SelectionMetric::MacroF1;
    if (name == "top2") return SelectionMetric::Top2;
    throw std::invalid_argument("unknown selection metric '" + name + "' (accuracy, macro_f1, top2)");
}

double metric_value(const MetricsReport& report, SelectionMetric metric) {
    switch (metric) {
        case SelectionMetric::Accuracy: return report.accuracy;
        case SelectionMetric::MacroF1: return report.macro_f1;
        case SelectionMetric::Top2: return report.top2_accuracy;
    }
    return report.accuracy;
}

GridSearchResult grid_search(const Grid& grid, const GridProcedure& procedure, SelectionMetric metric,
                             const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw std::invalid_argument("grid search needs at least one seed");
    const auto points = enumerate_grid(grid);
    GridSearchResult result;
    for (std::size_t i = 0; i < points.size(); ++i) {
        std::vector<MetricsReport> reports;
        double total = 0.0;
        for (auto seed : seeds) {
            reports.push_back(procedure(points[i], seed));
            total += metric_value(reports.back(), metric);
            result.runs.push_back({i, seed, reports.back()});
        }
        result.points.push_back({points[i], aggregate_runs(reports), total / static_cast<double>(seeds.size())});
    }
    for (std::size_t i = 1; i < result.points.size(); ++i) {
        const auto& cand = result.points[i];
        const auto& best = result.points[result.best];
        if (cand.score > best.score ||
            (cand.score == best.score && canonical_key(cand.point) < canonical_key(best.point))) {
            result.best = i;
        }
    }
    return result;
}

void write_grid_csv(std::ostream& out, const Grid& grid, const GridSearchResult& result) {
    for (const auto& axis : grid.axes) out << axis.name << ',';
    out << "seed,accuracy,macro_f1,top2\n";
    const auto old = out.precision(10);
    auto axes = [&](const GridPoint& p) {
        for (const auto& [name, v] : p.values) out << v << ',';
    };
    for (const auto& run : result.runs) {
        axes(result.points[run.point].point);
        out << run.seed << ',' << run.report.accuracy << ',' << run.report.macro_f1 << ',' << run.report.top2_accuracy
            << '\n';
    }
    for (const auto& p : result.points) {
        axes(p.point);
        out << "mean," << p.aggregate.accuracy.mean << ',' << p.aggregate.macro_f1.mean << ','
            << p.aggregate.top2_accuracy.mean << '\n';
    }
    out.precision(old);
}

}  // namespace traffic
