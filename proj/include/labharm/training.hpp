#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "labharm/pair_factory.hpp"
#include "labharm/reranker.hpp"

namespace labharm {

struct TrainConfig {
    double lr_max = 1e-2;
    double warmup_fraction = 0.1;
    double max_grad_norm = 1.0;
    double label_smoothing = 0.0;
    int epochs = 1;
    std::size_t batch_size = 32;
    std::uint64_t seed = 42;
    double validation_fraction = 0.05;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    /// Projects weights onto w >= 0 after every step. All features are
    /// similarities, so this keeps the score monotone in each of them.
    bool nonnegative_weights = true;

    /// Throws InvalidArgument.
    void validate() const;
};

/// lr_max * t / t_warmup up to t_warmup, then lr_max * (T - t) / (T - t_warmup).
double learning_rate(double t, double total_steps, double warmup_steps, double lr_max);

/// Scales g to norm max_norm when its L2 norm exceeds it; returns the
/// norm before clipping.
double clip_gradient(std::span<double> g, double max_norm);

/// Mean smoothed BCE from pre-sigmoid scores, computed as
/// max(z,0) - z*y~ + log1p(exp(-|z|)). Throws LengthMismatch.
double bce_with_logits(std::span<const double> logits, std::span<const double> labels, double smoothing);

/// Mean smoothed BCE from probabilities in (0,1). Throws LengthMismatch and
/// InvalidArgument for probabilities outside (0,1).
double bce_loss(std::span<const double> predictions, std::span<const double> labels, double smoothing);

/// Loss and gradient of bce_with_logits for a linear model. The gradient
/// holds one entry per weight followed by the bias.
struct LossGradient {
    double loss = 0.0;
    std::vector<double> gradient;
};
LossGradient loss_and_gradient(const LinearModel& model, const std::vector<std::vector<double>>& features,
                               std::span<const double> labels, double smoothing);

struct Classification {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double accuracy() const;
    double precision() const;
    double recall() const;
    double f1() const;
};

/// Thresholds probabilities at 0.5.
Classification classify(std::span<const double> probabilities, std::span<const double> labels);

struct TrainReport {
    std::size_t train_pairs = 0;
    std::size_t validation_pairs = 0;
    std::size_t total_steps = 0;
    std::size_t warmup_steps = 0;
    std::vector<double> loss_curve;  // mean training loss per logged window
    std::vector<double> epoch_validation_loss;
    std::vector<double> epoch_validation_f1;
    double validation_loss = 0.0;
    Classification validation;
    double max_grad_norm_before_clip = 0.0;
    double max_grad_norm_after_clip = 0.0;
    int best_epoch = 0;
    std::string note;

    nlohmann::json to_json() const;
};

struct TrainResult {
    ReferenceScorer scorer;
    TrainReport report;
};

/// Shuffles with cfg.seed, holds out cfg.validation_fraction, trains with
/// AdamW under the warmup/decay schedule and keeps the epoch with the best
/// validation F1. Throws EmptyDataset and DivergenceError.
TrainResult train(ReferenceScorer scorer, const std::vector<LabeledPair>& pairs, const TrainConfig& cfg);

/// Validation metrics of a scorer on labelled pairs.
Classification evaluate_pairs(const ReferenceScorer& scorer, const std::vector<LabeledPair>& pairs);

}  // namespace labharm
