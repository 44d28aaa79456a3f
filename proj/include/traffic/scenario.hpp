#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace traffic {

inline constexpr int kScenarioFormatVersion = 1;

struct Lane {
    std::string approach;
    double arrival_rate = 0.0;     // veh/s, Poisson
    double saturation_rate = 1.0;  // veh/s discharged while green
    double capacity = 20.0;        // vehicles; scales the density-class thresholds
    double weight = 1.0;           // weight in the GA fitness
};

struct Scenario {
    std::vector<Lane> lanes;
    std::vector<std::vector<std::size_t>> phases;  // lanes that are green in each phase
    double lost_time = 3.0;                        // all-red seconds per switch
    double horizon = 3600.0;
    double dt = 1.0;
    std::uint64_t seed = 1;

    /// Throws std::invalid_argument with the first problem found.
    void validate() const;
    /// Number of steps the horizon covers.
    std::size_t steps() const;
    /// Lost time expressed in steps.
    std::size_t lost_steps() const;
    /// First phase (lowest id) that gives `lane` green.
    std::size_t phase_of(std::size_t lane) const;
    bool lane_in_phase(std::size_t lane, std::size_t phase) const;
};

std::string scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const std::filesystem::path& path, const Scenario& scenario);

/// Four approaches, one phase each, with strongly unequal Poisson demand.
Scenario reference_scenario();
/// Two lanes on two phases; nearly all demand on lane 0.
Scenario asymmetric_two_lane_scenario();

}  // namespace traffic
