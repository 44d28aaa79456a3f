#pragma once

#include <cstdint>
#include <vector>

#include "traffic/scenario.hpp"

namespace traffic {

/// Search space and operators for fixed-time green plans.
struct GaConfig {
    std::size_t generations = 20;   // the initial population counts as generation 1
    std::size_t population = 12;
    double min_green = 5.0;
    double max_green = 60.0;
    double green_step = 5.0;
    std::size_t tournament = 3;
    double mutation_probability = 0.1;
    std::size_t elites = 1;
    std::vector<std::uint64_t> eval_seeds;  // arrival seeds for fitness; empty = scenario seed
    std::uint64_t seed = 0;
};

/// Admissible green values min, min+step, ... <= max.
std::vector<double> green_values(const GaConfig& cfg);

/// Sum over lanes of weight * mean delay, averaged over the evaluation seeds.
double timing_fitness(const Scenario& scenario, const std::vector<double>& greens,
                      const std::vector<std::uint64_t>& seeds);

struct GaResult {
    std::vector<double> greens;
    double fitness = 0.0;
    std::vector<double> best_per_generation;
    double initial_best = 0.0;
    std::size_t evaluations = 0;  // distinct plans simulated
};

/// Tournament selection, uniform crossover, per-gene mutation and elitism.
GaResult ga_optimize(const Scenario& scenario, const GaConfig& cfg);

struct TimingSearch {
    std::vector<double> best_greens;
    double best_fitness = 0.0;
    std::vector<double> worst_greens;
    double worst_fitness = 0.0;
    std::size_t points = 0;
};

/// Every plan in the GA's grid; ties go to the first plan in enumeration order.
TimingSearch exhaustive_timings(const Scenario& scenario, const GaConfig& cfg, std::size_t cap = 10000);

}  // namespace traffic
