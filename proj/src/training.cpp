#include "labharm/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "labharm/error.hpp"
#include "labharm/parallel.hpp"
#include "labharm/rng.hpp"

namespace labharm {

void TrainConfig::validate() const {
    if (!(lr_max > 0.0)) throw InvalidArgument("lr_max must be positive");
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) throw InvalidArgument("warmup fraction must be in [0,1)");
    if (!(max_grad_norm > 0.0)) throw InvalidArgument("max_grad_norm must be positive");
    if (!(label_smoothing >= 0.0 && label_smoothing <= 0.2)) throw InvalidArgument("label smoothing must be in [0,0.2]");
    if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
    if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        throw InvalidArgument("validation fraction must be in [0,1)");
    }
    if (!(weight_decay >= 0.0)) throw InvalidArgument("weight decay must be >= 0");
}

double learning_rate(double t, double total_steps, double warmup_steps, double lr_max) {
    if (t <= warmup_steps) return warmup_steps > 0 ? lr_max * t / warmup_steps : lr_max;
    if (total_steps <= warmup_steps) return 0.0;
    return std::max(0.0, lr_max * (total_steps - t) / (total_steps - warmup_steps));
}

double clip_gradient(std::span<double> g, double max_norm) {
    double sq = 0.0;
    for (double v : g) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double s = max_norm / norm;
        for (double& v : g) v *= s;
    }
    return norm;
}

namespace {

double smoothed(double y, double eps) { return y * (1.0 - eps) + eps / 2.0; }

double logit_loss(double z, double y) { return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))); }

}  // namespace

double bce_with_logits(std::span<const double> logits, std::span<const double> labels, double smoothing) {
    if (logits.size() != labels.size()) throw LengthMismatch("logits and labels differ in length");
    if (logits.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) sum += logit_loss(logits[i], smoothed(labels[i], smoothing));
    return sum / static_cast<double>(logits.size());
}

double bce_loss(std::span<const double> predictions, std::span<const double> labels, double smoothing) {
    if (predictions.size() != labels.size()) throw LengthMismatch("predictions and labels differ in length");
    std::vector<double> z;
    z.reserve(predictions.size());
    for (double p : predictions) {
        if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("predictions must lie in (0,1)");
        z.push_back(std::log(p) - std::log1p(-p));
    }
    return bce_with_logits(z, labels, smoothing);
}

LossGradient loss_and_gradient(const LinearModel& model, const std::vector<std::vector<double>>& features,
                               std::span<const double> labels, double smoothing) {
    if (features.size() != labels.size()) throw LengthMismatch("features and labels differ in length");
    const std::size_t d = model.weights.size();
    LossGradient out{0.0, std::vector<double>(d + 1, 0.0)};
    if (features.empty()) return out;
    const double n = static_cast<double>(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        const double z = model.logit(features[i]);
        const double y = smoothed(labels[i], smoothing);
        out.loss += logit_loss(z, y);
        const double r = (sigmoid(z) - y) / n;
        for (std::size_t j = 0; j < d; ++j) out.gradient[j] += r * features[i][j];
        out.gradient[d] += r;
    }
    out.loss /= n;
    return out;
}

double Classification::accuracy() const {
    const auto n = tp + fp + tn + fn;
    return n ? static_cast<double>(tp + tn) / static_cast<double>(n) : 0.0;
}
double Classification::precision() const {
    return tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
}
double Classification::recall() const { return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
double Classification::f1() const {
    const double p = precision(), r = recall();
    return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
}

Classification classify(std::span<const double> probabilities, std::span<const double> labels) {
    if (probabilities.size() != labels.size()) throw LengthMismatch("probabilities and labels differ in length");
    Classification c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool pred = probabilities[i] >= 0.5;
        const bool pos = labels[i] >= 0.5;
        if (pred && pos) ++c.tp;
        else if (pred) ++c.fp;
        else if (pos) ++c.fn;
        else ++c.tn;
    }
    return c;
}

nlohmann::json TrainReport::to_json() const {
    return {{"note", note},
            {"train_pairs", train_pairs},
            {"validation_pairs", validation_pairs},
            {"total_steps", total_steps},
            {"warmup_steps", warmup_steps},
            {"loss_curve", loss_curve},
            {"epoch_validation_loss", epoch_validation_loss},
            {"epoch_validation_f1", epoch_validation_f1},
            {"best_epoch", best_epoch},
            {"validation",
             {{"loss", validation_loss},
              {"accuracy", validation.accuracy()},
              {"precision", validation.precision()},
              {"recall", validation.recall()},
              {"f1", validation.f1()}}},
            {"max_grad_norm_before_clip", max_grad_norm_before_clip},
            {"max_grad_norm_after_clip", max_grad_norm_after_clip}};
}

namespace {

std::vector<std::vector<double>> featurize(const FeatureExtractor& fx, const std::vector<LabeledPair>& pairs,
                                           const std::vector<std::size_t>& order) {
    std::vector<std::vector<double>> out(order.size());
    parallel_for(order.size(), 0, [&](std::size_t i) {
        const auto& p = pairs[order[i]];
        const auto enc = encode_pair(p.left, p.right);
        out[i] = fx.extract(enc.left, enc.right);
    });
    return out;
}

std::vector<double> probabilities(const LinearModel& m, const std::vector<std::vector<double>>& x) {
    std::vector<double> out;
    out.reserve(x.size());
    for (const auto& row : x) out.push_back(m.probability(row));
    return out;
}

std::vector<double> logits(const LinearModel& m, const std::vector<std::vector<double>>& x) {
    std::vector<double> out;
    out.reserve(x.size());
    for (const auto& row : x) out.push_back(m.logit(row));
    return out;
}

}  // namespace

Classification evaluate_pairs(const ReferenceScorer& scorer, const std::vector<LabeledPair>& pairs) {
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    const auto x = featurize(scorer.features(), pairs, order);
    std::vector<double> y;
    for (const auto& p : pairs) y.push_back(p.label);
    return classify(probabilities(scorer.model(), x), y);
}

TrainResult train(ReferenceScorer scorer, const std::vector<LabeledPair>& pairs, const TrainConfig& cfg) {
    cfg.validate();
    if (pairs.empty()) throw EmptyDataset("no training pairs");

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(pairs.size())));
    if (cfg.validation_fraction > 0.0 && n_val == 0 && pairs.size() > 1) n_val = 1;
    const std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    if (train_idx.empty()) throw EmptyDataset("validation split leaves no training pairs");

    const auto& fx = scorer.features();
    const auto x_train = featurize(fx, pairs, train_idx);
    const auto x_val = featurize(fx, pairs, val_idx);
    std::vector<double> y_train, y_val;
    for (auto i : train_idx) y_train.push_back(pairs[i].label);
    for (auto i : val_idx) y_val.push_back(pairs[i].label);

    TrainReport report;
    report.note = "lr_max " + std::to_string(cfg.lr_max) +
                  " for the linear reference scorer (transformer fine-tuning uses 1e-5)";
    report.train_pairs = train_idx.size();
    report.validation_pairs = val_idx.size();
    const std::size_t batches = (train_idx.size() + cfg.batch_size - 1) / cfg.batch_size;
    report.total_steps = batches * static_cast<std::size_t>(cfg.epochs);
    report.warmup_steps = static_cast<std::size_t>(std::floor(cfg.warmup_fraction * static_cast<double>(report.total_steps)));
    if (report.warmup_steps >= report.total_steps) report.warmup_steps = report.total_steps - 1;

    LinearModel model = scorer.model();
    const std::size_t d = model.weights.size();
    std::vector<double> m1(d + 1, 0.0), m2(d + 1, 0.0);
    LinearModel best = model;
    double best_f1 = -1.0;

    std::vector<std::size_t> perm(train_idx.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t step = 0;
    const std::size_t log_every = std::max<std::size_t>(1, report.total_steps / 100);
    double window = 0.0;
    std::size_t window_n = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (epoch > 0) {
            for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
        }
        for (std::size_t b = 0; b < batches; ++b) {
            const auto lo = b * cfg.batch_size;
            const auto hi = std::min(perm.size(), lo + cfg.batch_size);
            std::vector<std::vector<double>> xb;
            std::vector<double> yb;
            for (auto k = lo; k < hi; ++k) {
                xb.push_back(x_train[perm[k]]);
                yb.push_back(y_train[perm[k]]);
            }
            auto lg = loss_and_gradient(model, xb, yb, cfg.label_smoothing);
            if (!std::isfinite(lg.loss)) throw DivergenceError("training loss became non-finite at step " + std::to_string(step));
            const double norm = clip_gradient(lg.gradient, cfg.max_grad_norm);
            report.max_grad_norm_before_clip = std::max(report.max_grad_norm_before_clip, norm);
            report.max_grad_norm_after_clip = std::max(report.max_grad_norm_after_clip, std::min(norm, cfg.max_grad_norm));

            ++step;
            const double lr = learning_rate(static_cast<double>(step), static_cast<double>(report.total_steps),
                                            static_cast<double>(report.warmup_steps), cfg.lr_max);
            const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            for (std::size_t j = 0; j <= d; ++j) {
                const double g = lg.gradient[j];
                m1[j] = cfg.beta1 * m1[j] + (1.0 - cfg.beta1) * g;
                m2[j] = cfg.beta2 * m2[j] + (1.0 - cfg.beta2) * g * g;
                const double update = (m1[j] / c1) / (std::sqrt(m2[j] / c2) + cfg.adam_eps);
                double& w = j < d ? model.weights[j] : model.bias;
                if (j < d) w -= lr * cfg.weight_decay * w;
                w -= lr * update;
                if (j < d && cfg.nonnegative_weights) w = std::max(w, 0.0);
            }
            window += lg.loss;
            ++window_n;
            if (window_n == log_every) {
                report.loss_curve.push_back(window / static_cast<double>(window_n));
                window = 0.0;
                window_n = 0;
            }
        }
        const auto& x_eval = x_val.empty() ? x_train : x_val;
        const auto& y_eval = x_val.empty() ? y_train : y_val;
        const double vloss = bce_with_logits(logits(model, x_eval), y_eval, 0.0);
        const auto cls = classify(probabilities(model, x_eval), y_eval);
        report.epoch_validation_loss.push_back(vloss);
        report.epoch_validation_f1.push_back(cls.f1());
        if (cls.f1() > best_f1) {
            best_f1 = cls.f1();
            best = model;
            report.best_epoch = epoch + 1;
            report.validation = cls;
            report.validation_loss = vloss;
        }
    }
    if (window_n > 0) report.loss_curve.push_back(window / static_cast<double>(window_n));

    scorer.model() = best;
    scorer.metrics = {{"validation_f1", report.validation.f1()},
                      {"validation_accuracy", report.validation.accuracy()},
                      {"validation_loss", report.validation_loss}};
    scorer.trained_on = {{"pairs", pairs.size()},
                         {"seed", cfg.seed},
                         {"epochs", cfg.epochs},
                         {"lr_max", cfg.lr_max},
                         {"label_smoothing", cfg.label_smoothing}};
    return {std::move(scorer), std::move(report)};
}

}  // namespace labharm
