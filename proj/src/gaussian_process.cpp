#include "labharm/gaussian_process.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "labharm/error.hpp"

namespace labharm {

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double expected_improvement(double mean, double sigma, double best) {
    const double diff = mean - best;
    if (!(sigma > 0.0)) return std::max(0.0, diff);
    const double z = diff / sigma;
    return std::max(0.0, diff * normal_cdf(z) + sigma * normal_pdf(z));
}

double GaussianProcess::kernel(const double* a, const double* b) const {
    double s = 0.0;
    const auto d = x_.cols();
    for (Eigen::Index k = 0; k < d; ++k) {
        const double diff = a[k] - b[k];
        s += diff * diff * inv_ls2_[static_cast<std::size_t>(k)];
    }
    return std::exp(-0.5 * s);
}

double GaussianProcess::factorize() {
    const auto n = x_.rows();
    inv_ls2_.resize(length_scales_.size());
    for (std::size_t k = 0; k < length_scales_.size(); ++k) inv_ls2_[k] = 1.0 / (length_scales_[k] * length_scales_[k]);

    // Rows are copied to contiguous storage so kernel() can take raw pointers.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> xr = x_;
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) k(i, j) = k(j, i) = kernel(xr.row(i).data(), xr.row(j).data());
    }
    double jitter = options_.noise;
    for (int attempt = 0; attempt < 8; ++attempt) {
        Eigen::MatrixXd kn = k;
        kn.diagonal().array() += jitter;
        chol_.compute(kn);
        if (chol_.info() == Eigen::Success) break;
        jitter = std::max(jitter * 10.0, 1e-10);
    }
    if (chol_.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    alpha_ = chol_.solve(y_);
    const Eigen::MatrixXd l = chol_.matrixL();
    const double log_det = 2.0 * l.diagonal().array().log().sum();
    return -0.5 * y_.dot(alpha_) - 0.5 * log_det - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

void GaussianProcess::fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y) {
    const auto d = x.empty() ? 0 : x.front().size();
    std::vector<double> ls(d, options_.initial_length_scale);
    fit(x, y, ls);
    if (!options_.fit_length_scales || options_.length_scale_grid.empty() || x.size() < 2) return;

    double best = lml_;
    for (int sweep = 0; sweep < options_.sweeps; ++sweep) {
        bool changed = false;
        for (std::size_t k = 0; k < d; ++k) {
            const double current = length_scales_[k];
            double chosen = current;
            for (double candidate : options_.length_scale_grid) {
                if (candidate == current) continue;
                length_scales_[k] = candidate;
                const double lml = factorize();
                if (lml > best + 1e-12) {
                    best = lml;
                    chosen = candidate;
                }
            }
            length_scales_[k] = chosen;
            changed |= chosen != current;
        }
        if (!changed) break;
    }
    lml_ = factorize();
}

void GaussianProcess::fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                          std::vector<double> length_scales) {
    if (x.empty() || x.size() != y.size()) throw InvalidArgument("GP fit needs matching, non-empty x and y");
    const auto n = static_cast<Eigen::Index>(x.size());
    const auto d = static_cast<Eigen::Index>(x.front().size());
    if (static_cast<Eigen::Index>(length_scales.size()) != d) throw InvalidArgument("one length scale per dimension");
    x_.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(x[static_cast<std::size_t>(i)].size()) != d) {
            throw DimensionMismatch("GP inputs of mixed dimension");
        }
        for (Eigen::Index k = 0; k < d; ++k) x_(i, k) = x[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    }
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double var = 0.0;
    for (double v : y) var += (v - mean) * (v - mean);
    var /= static_cast<double>(y.size());
    y_mean_ = mean;
    y_scale_ = var > 1e-24 ? std::sqrt(var) : 1.0;
    y_best_ = *std::max_element(y.begin(), y.end());
    y_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) y_(i) = (y[static_cast<std::size_t>(i)] - y_mean_) / y_scale_;
    length_scales_ = std::move(length_scales);
    lml_ = factorize();
    fitted_ = true;
}

GaussianProcess::Prediction GaussianProcess::predict(std::span<const double> x) const {
    if (!fitted_) throw UnfittedSurrogate("GP has not been fitted");
    if (static_cast<Eigen::Index>(x.size()) != x_.cols()) throw DimensionMismatch("GP query dimension mismatch");
    const auto n = x_.rows();
    Eigen::VectorXd ks(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < x_.cols(); ++k) {
            const double diff = x[static_cast<std::size_t>(k)] - x_(i, k);
            s += diff * diff * inv_ls2_[static_cast<std::size_t>(k)];
        }
        ks(i) = std::exp(-0.5 * s);
    }
    const double mean = ks.dot(alpha_);
    const Eigen::VectorXd v = chol_.matrixL().solve(ks);
    const double var = std::max(0.0, 1.0 - v.squaredNorm());
    return {y_mean_ + y_scale_ * mean, y_scale_ * y_scale_ * var};
}

double GaussianProcess::expected_improvement(std::span<const double> x, double best) const {
    const auto p = predict(x);
    return labharm::expected_improvement(p.mean, std::sqrt(p.variance), best);
}

}  // namespace labharm
