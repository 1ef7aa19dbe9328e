#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

#include "labharm/gaussian_process.hpp"
#include "labharm/rng.hpp"
#include "labharm/types.hpp"

namespace labharm {

struct Bounds {
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t dimension() const { return lower.size(); }
    bool contains(std::span<const double> x) const;
    void validate() const;

    /// alpha, beta in [0,10]; w_test, w_sample, w_unit in [0,5].
    static Bounds weight_bounds();
};

struct TunerConfig {
    Bounds bounds = Bounds::weight_bounds();
    std::size_t budget = 120;
    std::size_t initial_designs = 20;  // Latin-hypercube points before EI
    std::uint64_t seed = 0;
    std::size_t random_starts = 256;   // EI multi-start candidates
    std::size_t local_searches = 8;    // best starts refined by pattern search
    GaussianProcess::Options gp{};
    /// Points evaluated first (counted in the budget), e.g. the best known
    /// lexical-only and semantic-only configurations.
    std::vector<std::vector<double>> warm_start;

    void validate() const;  // budget >= initial_designs >= 2
};

struct Observation {
    std::vector<double> theta;
    double objective = 0.0;
};

struct TuneResult {
    std::vector<double> best_theta;
    double best_value = 0.0;
    std::vector<Observation> trace;
};

using Objective = std::function<double(std::span<const double>)>;

/// Argmax of EI over the box: EI is evaluated at `random_starts` seeded
/// points, and the best `local_searches` of them (plus the incumbent) are
/// refined by compass search. Throws UnfittedSurrogate.
std::vector<double> propose_next(const GaussianProcess& surrogate, const Bounds& bounds, double best, Rng& rng,
                                 std::size_t random_starts = 256, std::size_t local_searches = 8);

/// Sequential GP/EI maximization of an objective with values in [0,1].
/// The GP works on the unit cube; proposals are mapped back to bounds.
/// Throws ObjectiveFailure when the objective throws or leaves [0,1].
TuneResult tune(const Objective& objective, const TunerConfig& cfg);

struct WeightTuneResult {
    WeightVector best;
    double best_value = 0.0;
    std::vector<Observation> trace;
};

WeightTuneResult tune_weights(const std::function<double(const WeightVector&)>& objective, const TunerConfig& cfg);

/// JSON-lines trace: {"iteration", "theta", "objective", "incumbent"}.
void write_trace(std::ostream& out, std::span<const Observation> trace);

}  // namespace labharm
