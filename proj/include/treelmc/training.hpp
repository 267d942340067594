#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "treelmc/dataset.hpp"
#include "treelmc/model.hpp"

namespace treelmc {

struct TrainConfig {
    std::vector<double> learning_rates{0.01, 0.001, 0.0001};
    int batch_size = 512;
    int epochs = 50;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
};

struct AdamState {
    EnsembleParams first_moment;
    EnsembleParams second_moment;
    std::int64_t step = 0;

    static AdamState zeros(const ArchitectureSpec& spec);
};

/// -log softmax(logits)[label] with log-sum-exp stabilization.
double cross_entropy(std::span<const double> logits, int label);

struct Gradients {
    EnsembleParams grad;  // mean over the batch; empty-leaf entries are exactly zero
    double mean_loss = 0.0;
};

/// Backpropagates mean cross-entropy over `rows` of `data` through the ensemble.
Gradients gradients(const EnsembleParams& params, const Dataset& data, std::span<const std::size_t> rows);
Gradients gradients(const EnsembleParams& params, const Dataset& data);

void adam_step(AdamState& state, EnsembleParams& params, const EnsembleParams& grads, double lr,
               const TrainConfig& config = {});

struct TrainResult {
    EnsembleParams params;
    double learning_rate = 0.0;
    std::vector<double> train_accuracy;  // after each epoch
    std::vector<double> mean_loss;       // mean batch loss per epoch
};

/// Mini-batch Adam from init_params(spec, config.seed). Each epoch visits the
/// rows in a Fisher-Yates order seeded by (config.seed, epoch); the trailing
/// partial batch is kept.
TrainResult train(const ArchitectureSpec& spec, const Dataset& data, const TrainConfig& config, double lr);

struct LearningRateSelection {
    TrainResult best;
    std::vector<double> candidates;
    std::vector<double> final_accuracy;  // per candidate, same order
};

/// Trains once per candidate rate and keeps the run with the highest final
/// train accuracy; ties go to the larger rate.
LearningRateSelection select_learning_rate(const ArchitectureSpec& spec, const Dataset& data,
                                           const TrainConfig& config);

}  // namespace treelmc
