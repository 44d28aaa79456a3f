#pragma once

#include <array>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "traffic/density.hpp"
#include "traffic/simulator.hpp"

namespace traffic {

/// Cycles the phases in order, holding each for its green time.
class FixedTimeController : public Controller {
public:
    explicit FixedTimeController(std::vector<double> greens, std::string label = "FixedTime");
    std::string name() const override { return label_; }
    std::size_t decide(const JunctionState& state, const Scenario& scenario) const override;
    const std::vector<double>& greens() const { return greens_; }

private:
    std::vector<double> greens_;
    std::string label_;
};

struct LqfParams {
    double min_green = 5.0;
    double max_green = 60.0;
};

/// Before min green: hold. Afterwards the phase with the largest summed queue
/// wins; ties go to the current phase, then the lowest id. At max green the
/// best other phase is taken if it has any queue.
std::size_t lqf_decide(const JunctionState& state, const Scenario& scenario, const LqfParams& params);

class LqfController : public Controller {
public:
    explicit LqfController(LqfParams params = {});
    std::string name() const override { return "LQF"; }
    std::size_t decide(const JunctionState& state, const Scenario& scenario) const override {
        return lqf_decide(state, scenario, params_);
    }

private:
    LqfParams params_;
};

/// Queue length mapped onto the density classes, thresholds at 8/20/50/100 %
/// of the lane capacity.
DensityClass queue_density_class(std::size_t queued, double capacity);

struct DensityParams {
    std::vector<double> base_green;                        // per phase; one value applies to all
    std::array<double, kDensityClassCount> extension{};    // seconds added per class
    double max_green = 60.0;

    static DensityParams defaults();
    /// Builds the extension table from named classes; every class must be present.
    static DensityParams from_map(const std::map<DensityClass, double>& class_map, std::vector<double> base_green,
                                  double max_green);
};

struct DensityDecision {
    std::size_t phase = 0;
    DensityClass busiest = DensityClass::Empty;  // heaviest class among the current phase's lanes
    double extension = 0.0;
    double green_target = 0.0;                   // base + extension, capped at max green
};

/// Phases rotate in order. The current phase is held while its green time is
/// below base green plus the extension for its busiest lane.
DensityDecision density_adaptive_decide(const JunctionState& state, const Scenario& scenario,
                                        const DensityParams& params);

class DensityAdaptiveController : public Controller {
public:
    explicit DensityAdaptiveController(DensityParams params = DensityParams::defaults());
    std::string name() const override { return "DensityAdaptive"; }
    std::size_t decide(const JunctionState& state, const Scenario& scenario) const override {
        return density_adaptive_decide(state, scenario, params_).phase;
    }

private:
    DensityParams params_;
};

/// Anti-starvation override. Red lanes with queued vehicles are ordered by the
/// time left before they reach `max_red` (longest red first, ties to the lower
/// lane id). When the first of them is due, or the i-th would be due before
/// the i switches ahead of it can complete, the phase serving the first is forced.
std::size_t enforce_max_red(const JunctionState& state, const Scenario& scenario, std::size_t proposed,
                            double max_red);

/// Smallest max_red the rule accepts for a scenario: one switch plus one green
/// step per phase.
double minimum_max_red(const Scenario& scenario);

class MaxRedGuard : public Controller {
public:
    MaxRedGuard(std::shared_ptr<const Controller> inner, double max_red);
    std::string name() const override { return inner_->name(); }
    std::size_t decide(const JunctionState& state, const Scenario& scenario) const override;
    std::size_t redirect(const JunctionState& state, const Scenario& scenario) const override;
    double max_red() const { return max_red_; }

private:
    std::shared_ptr<const Controller> inner_;
    double max_red_;
};

/// Equal greens that put every phase on the same cycle.
std::vector<double> default_fixed_greens(const Scenario& scenario, double green = 20.0);

}  // namespace traffic
