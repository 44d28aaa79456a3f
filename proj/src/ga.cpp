#include "traffic/ga.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "traffic/controllers.hpp"
#include "traffic/random.hpp"
#include "traffic/simulator.hpp"

namespace traffic {

std::vector<double> green_values(const GaConfig& cfg) {
    if (!(cfg.min_green > 0.0) || cfg.max_green < cfg.min_green || !(cfg.green_step > 0.0)) {
        throw std::invalid_argument("green bounds need 0 < min <= max and a positive step");
    }
    std::vector<double> out;
    for (std::size_t k = 0;; ++k) {
        const double g = cfg.min_green + static_cast<double>(k) * cfg.green_step;
        if (g > cfg.max_green + 1e-9) break;
        out.push_back(g);
    }
    return out;
}

double timing_fitness(const Scenario& scenario, const std::vector<double>& greens,
                      const std::vector<std::uint64_t>& seeds) {
    const FixedTimeController controller(greens);
    const std::vector<std::uint64_t> use = seeds.empty() ? std::vector<std::uint64_t>{scenario.seed} : seeds;
    double total = 0.0;
    for (auto seed : use) {
        const auto stats = run_scenario(scenario, controller, seed);
        for (std::size_t l = 0; l < scenario.lanes.size(); ++l) {
            total += scenario.lanes[l].weight * stats.lanes[l].mean_delay;
        }
    }
    return total / static_cast<double>(use.size());
}

namespace {

using Genome = std::vector<std::size_t>;

class FitnessCache {
public:
    FitnessCache(const Scenario& scenario, const GaConfig& cfg, std::vector<double> values)
        : scenario_(scenario), cfg_(cfg), values_(std::move(values)) {}

    double operator()(const Genome& g) {
        const auto it = cache_.find(g);
        if (it != cache_.end()) return it->second;
        const double f = timing_fitness(scenario_, greens(g), cfg_.eval_seeds);
        cache_.emplace(g, f);
        return f;
    }
    std::vector<double> greens(const Genome& g) const {
        std::vector<double> out;
        for (auto i : g) out.push_back(values_[i]);
        return out;
    }
    std::size_t size() const { return cache_.size(); }

private:
    const Scenario& scenario_;
    const GaConfig& cfg_;
    std::vector<double> values_;
    std::map<Genome, double> cache_;
};

}  // namespace

GaResult ga_optimize(const Scenario& scenario, const GaConfig& cfg) {
    scenario.validate();
    if (cfg.population < 2) throw std::invalid_argument("GA population must be at least 2");
    if (cfg.generations < 1) throw std::invalid_argument("GA needs at least one generation");
    if (cfg.tournament < 1) throw std::invalid_argument("tournament size must be at least 1");
    if (cfg.elites >= cfg.population) throw std::invalid_argument("elites must be fewer than the population");
    const auto values = green_values(cfg);
    const std::size_t genes = scenario.phases.size();
    FitnessCache fitness(scenario, cfg, values);
    Rng rng(cfg.seed);

    std::vector<Genome> pop(cfg.population, Genome(genes));
    for (auto& g : pop)
        for (auto& v : g) v = rng.index(values.size());

    std::vector<double> scores(pop.size());
    auto score_all = [&] {
        for (std::size_t i = 0; i < pop.size(); ++i) scores[i] = fitness(pop[i]);
    };
    auto ranking = [&] {
        std::vector<std::size_t> idx(pop.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
        return idx;
    };
    auto select = [&] {
        std::size_t best = rng.index(pop.size());
        for (std::size_t k = 1; k < cfg.tournament; ++k) {
            const std::size_t c = rng.index(pop.size());
            if (scores[c] < scores[best]) best = c;
        }
        return best;
    };

    GaResult result;
    score_all();
    result.initial_best = *std::min_element(scores.begin(), scores.end());
    result.best_per_generation.push_back(result.initial_best);
    for (std::size_t gen = 1; gen < cfg.generations; ++gen) {
        const auto order = ranking();
        std::vector<Genome> next;
        for (std::size_t e = 0; e < cfg.elites; ++e) next.push_back(pop[order[e]]);
        while (next.size() < pop.size()) {
            const Genome& a = pop[select()];
            const Genome& b = pop[select()];
            Genome child(genes);
            for (std::size_t k = 0; k < genes; ++k) child[k] = rng.bernoulli(0.5) ? a[k] : b[k];
            for (auto& v : child) {
                if (rng.bernoulli(cfg.mutation_probability)) v = rng.index(values.size());
            }
            next.push_back(std::move(child));
        }
        pop = std::move(next);
        score_all();
        result.best_per_generation.push_back(*std::min_element(scores.begin(), scores.end()));
    }
    const auto best = ranking().front();
    result.greens = fitness.greens(pop[best]);
    result.fitness = scores[best];
    result.evaluations = fitness.size();
    return result;
}

TimingSearch exhaustive_timings(const Scenario& scenario, const GaConfig& cfg, std::size_t cap) {
    scenario.validate();
    const auto values = green_values(cfg);
    const std::size_t genes = scenario.phases.size();
    double points = std::pow(static_cast<double>(values.size()), static_cast<double>(genes));
    if (points > static_cast<double>(cap)) {
        throw std::invalid_argument("timing grid has " + std::to_string(static_cast<long long>(points)) +
                                    " plans, over the cap of " + std::to_string(cap));
    }
    FitnessCache fitness(scenario, cfg, values);
    TimingSearch out;
    Genome g(genes, 0);
    bool first = true;
    while (true) {
        const double f = fitness(g);
        ++out.points;
        if (first || f < out.best_fitness) out.best_fitness = f, out.best_greens = fitness.greens(g);
        if (first || f > out.worst_fitness) out.worst_fitness = f, out.worst_greens = fitness.greens(g);
        first = false;
        std::size_t k = genes;
        while (k > 0) {
            --k;
            if (++g[k] < values.size()) break;
            g[k] = 0;
            if (k == 0) return out;
        }
    }
}

}  // namespace traffic
