#include "labharm/bayes_tuner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "labharm/error.hpp"

namespace labharm {

bool Bounds::contains(std::span<const double> x) const {
    if (x.size() != lower.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
    }
    return true;
}

void Bounds::validate() const {
    if (lower.empty() || lower.size() != upper.size()) throw InvalidArgument("bounds need matching lower/upper");
    for (std::size_t i = 0; i < lower.size(); ++i) {
        if (!(lower[i] < upper[i])) throw InvalidArgument("bounds need lower < upper in every dimension");
    }
}

Bounds Bounds::weight_bounds() {
    return {{0.0, 0.0, 0.0, 0.0, 0.0},
            {WeightVector::kFusionMax, WeightVector::kFusionMax, WeightVector::kFieldMax, WeightVector::kFieldMax,
             WeightVector::kFieldMax}};
}

void TunerConfig::validate() const {
    bounds.validate();
    if (initial_designs < 2 || budget < initial_designs) {
        throw InvalidArgument("tuner requires budget >= initial_designs >= 2");
    }
    for (const auto& w : warm_start) {
        if (!bounds.contains(w)) throw InvalidArgument("warm-start point outside bounds");
    }
}

namespace {

std::vector<std::vector<double>> latin_hypercube(std::size_t n, std::size_t d, Rng& rng) {
    std::vector<std::vector<double>> pts(n, std::vector<double>(d));
    std::vector<std::size_t> perm(n);
    for (std::size_t k = 0; k < d; ++k) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
        for (std::size_t i = 0; i < n; ++i) {
            pts[i][k] = (static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(n);
        }
    }
    return pts;
}

struct Scored {
    double ei;
    std::vector<double> x;
};

Scored compass_search(const GaussianProcess& gp, const Bounds& b, double best, std::vector<double> x, double ei) {
    double step = 0.05;
    const double min_step = 1e-7;
    int evals = 0;
    while (step > min_step && evals < 2000) {
        bool improved = false;
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double span = b.upper[k] - b.lower[k];
            for (double dir : {1.0, -1.0}) {
                auto y = x;
                y[k] = std::clamp(y[k] + dir * step * span, b.lower[k], b.upper[k]);
                if (y[k] == x[k]) continue;
                const double v = gp.expected_improvement(y, best);
                ++evals;
                if (v > ei) {
                    ei = v;
                    x = std::move(y);
                    improved = true;
                    break;
                }
            }
        }
        if (!improved) step *= 0.5;
    }
    return {ei, std::move(x)};
}

}  // namespace

std::vector<double> propose_next(const GaussianProcess& gp, const Bounds& bounds, double best, Rng& rng,
                                 std::size_t random_starts, std::size_t local_searches) {
    if (!gp.fitted()) throw UnfittedSurrogate("propose_next on an unfitted surrogate");
    bounds.validate();
    const auto d = bounds.dimension();
    std::vector<Scored> starts;
    starts.reserve(random_starts);
    for (std::size_t i = 0; i < std::max<std::size_t>(random_starts, 1); ++i) {
        std::vector<double> x(d);
        for (std::size_t k = 0; k < d; ++k) x[k] = rng.uniform(bounds.lower[k], bounds.upper[k]);
        const double ei = gp.expected_improvement(x, best);
        starts.push_back({ei, std::move(x)});
    }
    std::stable_sort(starts.begin(), starts.end(), [](const Scored& a, const Scored& b) { return a.ei > b.ei; });
    if (starts.front().ei <= 0.0) return starts.front().x;

    Scored winner = starts.front();
    const auto refine = std::min(local_searches, starts.size());
    for (std::size_t i = 0; i < refine; ++i) {
        auto r = compass_search(gp, bounds, best, starts[i].x, starts[i].ei);
        if (r.ei > winner.ei) winner = std::move(r);
    }
    return winner.x;
}

TuneResult tune(const Objective& objective, const TunerConfig& cfg) {
    cfg.validate();
    const auto d = cfg.bounds.dimension();
    Rng rng(cfg.seed);
    const Bounds unit{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};

    auto to_theta = [&](const std::vector<double>& u) {
        std::vector<double> t(d);
        for (std::size_t k = 0; k < d; ++k) {
            t[k] = std::clamp(cfg.bounds.lower[k] + u[k] * (cfg.bounds.upper[k] - cfg.bounds.lower[k]),
                              cfg.bounds.lower[k], cfg.bounds.upper[k]);
        }
        return t;
    };
    auto to_unit = [&](const std::vector<double>& t) {
        std::vector<double> u(d);
        for (std::size_t k = 0; k < d; ++k) u[k] = (t[k] - cfg.bounds.lower[k]) / (cfg.bounds.upper[k] - cfg.bounds.lower[k]);
        return u;
    };

    TuneResult result;
    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    auto evaluate = [&](const std::vector<double>& u) {
        const auto theta = to_theta(u);
        double v;
        try {
            v = objective(theta);
        } catch (const std::exception& e) {
            throw ObjectiveFailure(std::string("objective threw: ") + e.what(), theta);
        }
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw ObjectiveFailure("objective returned " + std::to_string(v) + " outside [0,1]", theta);
        }
        xs.push_back(u);
        ys.push_back(v);
        result.trace.push_back({theta, v});
        if (result.trace.size() == 1 || v > result.best_value) {
            result.best_value = v;
            result.best_theta = theta;
        }
    };

    std::vector<std::vector<double>> initial;
    for (const auto& w : cfg.warm_start) initial.push_back(to_unit(w));
    const auto lhs_count = cfg.initial_designs > initial.size() ? cfg.initial_designs - initial.size() : 0;
    for (auto& p : latin_hypercube(lhs_count, d, rng)) initial.push_back(std::move(p));
    for (const auto& u : initial) {
        if (result.trace.size() >= cfg.budget) break;
        evaluate(u);
    }

    GaussianProcess gp(cfg.gp);
    while (result.trace.size() < cfg.budget) {
        gp.fit(xs, ys);
        evaluate(propose_next(gp, unit, result.best_value, rng, cfg.random_starts, cfg.local_searches));
    }
    return result;
}

WeightTuneResult tune_weights(const std::function<double(const WeightVector&)>& objective, const TunerConfig& cfg) {
    if (cfg.bounds.dimension() != 5) throw InvalidArgument("weight tuning needs 5-dimensional bounds");
    auto r = tune(
        [&](std::span<const double> t) { return objective(WeightVector{t[0], t[1], t[2], t[3], t[4]}); }, cfg);
    const auto& b = r.best_theta;
    return {WeightVector{b[0], b[1], b[2], b[3], b[4]}, r.best_value, std::move(r.trace)};
}

void write_trace(std::ostream& out, std::span<const Observation> trace) {
    double incumbent = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        incumbent = i == 0 ? trace[i].objective : std::max(incumbent, trace[i].objective);
        nlohmann::json j{{"iteration", i + 1},
                         {"theta", trace[i].theta},
                         {"objective", trace[i].objective},
                         {"incumbent", incumbent}};
        out << j.dump() << '\n';
    }
}

}  // namespace labharm
