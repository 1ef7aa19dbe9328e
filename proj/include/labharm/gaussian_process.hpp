#pragma once

#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace labharm {

double normal_pdf(double z);
double normal_cdf(double z);

/// E[max(0, f - best)] for f ~ N(mean, sigma^2):
/// (mean - best) Phi(z) + sigma phi(z), z = (mean - best) / sigma; for
/// sigma = 0 it is max(0, mean - best).
double expected_improvement(double mean, double sigma, double best);

/// GP regression with a squared-exponential kernel of unit signal variance
/// and per-dimension length scales. Targets are standardized internally.
class GaussianProcess {
public:
    struct Options {
        double noise = 1e-6;  // noise variance on the standardized scale
        std::vector<double> length_scale_grid{0.1, 0.3, 1.0, 3.0};
        bool fit_length_scales = true;
        int sweeps = 2;          // coordinate-ascent passes over the grid
        double initial_length_scale = 1.0;
    };

    struct Prediction {
        double mean = 0.0;
        double variance = 0.0;
    };

    GaussianProcess() = default;
    explicit GaussianProcess(Options options) : options_(std::move(options)) {}

    /// Fits on points x (rows) and targets y; length scales maximize the log
    /// marginal likelihood over the grid, one dimension at a time.
    void fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y);

    /// Fits with fixed length scales (no search).
    void fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
             std::vector<double> length_scales);

    bool fitted() const { return fitted_; }
    std::size_t dimension() const { return static_cast<std::size_t>(x_.cols()); }
    std::size_t size() const { return static_cast<std::size_t>(x_.rows()); }
    const std::vector<double>& length_scales() const { return length_scales_; }
    double log_marginal_likelihood() const { return lml_; }
    /// Largest observed target (original scale).
    double best_observed() const { return y_best_; }

    /// Posterior mean and variance (variance >= 0). Throws UnfittedSurrogate.
    Prediction predict(std::span<const double> x) const;

    /// EI of the posterior at x against `best`. Throws UnfittedSurrogate.
    double expected_improvement(std::span<const double> x, double best) const;

private:
    double kernel(const double* a, const double* b) const;
    double factorize();  // returns LML; sets chol_/alpha_

    Options options_;
    bool fitted_ = false;
    Eigen::MatrixXd x_;   // row-major semantics: one observation per row
    Eigen::VectorXd y_;   // standardized targets
    double y_mean_ = 0.0, y_scale_ = 1.0, y_best_ = 0.0;
    std::vector<double> length_scales_;
    std::vector<double> inv_ls2_;
    Eigen::LLT<Eigen::MatrixXd> chol_;
    Eigen::VectorXd alpha_;
    double lml_ = 0.0;
};

}  // namespace labharm
