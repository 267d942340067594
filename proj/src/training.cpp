#include "treelmc/training.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "treelmc/kernels.hpp"
#include "treelmc/random.hpp"

namespace treelmc {

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (learning_rates.empty()) throw std::invalid_argument("at least one learning rate is required");
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
        throw std::invalid_argument("Adam betas must lie in (0, 1)");
    }
    if (!(adam_eps > 0.0)) throw std::invalid_argument("adam_eps must be positive");
    for (double lr : learning_rates) {
        if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("learning rates must be positive");
    }
}

AdamState AdamState::zeros(const ArchitectureSpec& spec) {
    return AdamState{zeros_like(spec), zeros_like(spec), 0};
}

double cross_entropy(std::span<const double> logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
        throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                                std::to_string(logits.size()) + ")");
    }
    double peak = logits[0];
    for (double v : logits) peak = std::max(peak, v);
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - peak);
    return peak + std::log(sum) - logits[label];
}

namespace {

void softmax(std::span<const double> logits, std::span<double> out) {
    double peak = logits[0];
    for (double v : logits) peak = std::max(peak, v);
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        out[c] = std::exp(logits[c] - peak);
        sum += out[c];
    }
    for (double& v : out) v /= sum;
}

}  // namespace

Gradients gradients(const EnsembleParams& params, const Dataset& data, std::span<const std::size_t> rows) {
    if (rows.empty()) throw std::invalid_argument("gradients: empty batch");
    const auto& spec = params.spec;
    const Topology& topo = topology(spec);
    const int classes = spec.classes;
    const int leaves = spec.leaf_count();
    const int nodes = spec.node_count();

    Gradients out{zeros_like(spec), 0.0};
    std::vector<detail::TreeWorkspace> ws(params.trees.size());
    std::vector<double> logits(classes), tree_out(classes), delta(classes), leaf_err(leaves), dz(nodes);
    const double inv_batch = 1.0 / double(rows.size());

    for (std::size_t r : rows) {
        const auto x = data.features.row(r);
        const int label = data.labels[r];
        std::fill(logits.begin(), logits.end(), 0.0);
        for (std::size_t m = 0; m < params.trees.size(); ++m) {
            std::fill(tree_out.begin(), tree_out.end(), 0.0);
            detail::eval_gates(x, params.trees[m], ws[m]);
            detail::eval_flow(topo, ws[m]);
            detail::accumulate_output(params.trees[m], ws[m], tree_out);
            for (int c = 0; c < classes; ++c) logits[c] += tree_out[c];
        }
        out.mean_loss += cross_entropy(logits, label) * inv_batch;

        // dL/dlogit = softmax - onehot, scaled for the batch mean.
        softmax(logits, delta);
        delta[label] -= 1.0;
        for (double& d : delta) d *= inv_batch;

        for (std::size_t m = 0; m < params.trees.size(); ++m) {
            const TreeParams& tree = params.trees[m];
            TreeParams& g = out.grad.trees[m];
            const auto& w = ws[m];

            auto gpi = g.pi();
            for (int c = 0; c < classes; ++c) {
                kernels::axpy(delta[c], w.flow, gpi.subspan(std::size_t(c) * leaves, leaves));
            }
            std::fill(leaf_err.begin(), leaf_err.end(), 0.0);
            for (int c = 0; c < classes; ++c) {
                for (int l = 0; l < leaves; ++l) leaf_err[l] += delta[c] * tree.pi_at(c, l);
            }

            // d flow_l / d z_n = flow_l * sigma(-z_n) on a left branch and
            // -flow_l * sigma(z_n) on a right branch.
            std::fill(dz.begin(), dz.end(), 0.0);
            for (int l = 0; l < leaves; ++l) {
                const double s = leaf_err[l] * w.flow[l];
                if (s == 0.0) continue;
                for (const PathStep& step : topo.leaf_paths[l]) {
                    dz[step.slot] += step.right ? -s * w.left[step.slot] : s * w.right[step.slot];
                }
            }
            auto gb = g.b();
            for (int n = 0; n < nodes; ++n) {
                if (dz[n] == 0.0) continue;
                kernels::axpy(dz[n], x, g.w_node(n));
                gb[n] += dz[n];
            }
        }
    }

    if (spec.has_empty_leaf()) {
        for (auto& g : out.grad.trees) {
            for (int c = 0; c < classes; ++c) g.pi_at(c, leaves - 1) = 0.0;
        }
    }
    return out;
}

Gradients gradients(const EnsembleParams& params, const Dataset& data) {
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return gradients(params, data, rows);
}

void adam_step(AdamState& state, EnsembleParams& params, const EnsembleParams& grads, double lr,
               const TrainConfig& config) {
    if (params.trees.size() != grads.trees.size() || params.trees.size() != state.first_moment.trees.size()) {
        throw std::invalid_argument("adam_step: shape mismatch");
    }
    state.step += 1;
    const double t = double(state.step);
    const double bias1 = 1.0 - std::pow(config.adam_beta1, t);
    const double bias2 = 1.0 - std::pow(config.adam_beta2, t);
    const kernels::AdamCoefficients coeff{lr / bias1, config.adam_beta1, config.adam_beta2, std::sqrt(bias2),
                                          config.adam_eps};
    const auto& k = kernels::active();
    for (std::size_t m = 0; m < params.trees.size(); ++m) {
        auto p = params.trees[m].values();
        const auto g = grads.trees[m].values();
        auto m1 = state.first_moment.trees[m].values();
        auto m2 = state.second_moment.trees[m].values();
        if (p.size() != g.size() || p.size() != m1.size()) throw std::invalid_argument("adam_step: tree shape mismatch");
        k.adam_update(coeff, g.data(), m1.data(), m2.data(), p.data(), p.size());
    }
}

TrainResult train(const ArchitectureSpec& spec, const Dataset& data, const TrainConfig& config, double lr) {
    config.validate();
    if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
    if (data.feature_count() != static_cast<std::size_t>(spec.features)) {
        throw std::invalid_argument("train: dataset feature count does not match the architecture");
    }
    TrainResult result{init_params(spec, config.seed), lr, {}, {}};
    AdamState state = AdamState::zeros(spec);
    std::vector<std::size_t> order(data.size());

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(stream_seed(config.seed, std::uint64_t(epoch)));
        rng.shuffle(std::span<std::size_t>(order));

        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t len = std::min<std::size_t>(config.batch_size, order.size() - start);
            const auto batch = std::span<const std::size_t>(order).subspan(start, len);
            const Gradients g = gradients(result.params, data, batch);
            adam_step(state, result.params, g.grad, lr, config);
            loss_sum += g.mean_loss;
            ++batches;
        }
        result.mean_loss.push_back(loss_sum / double(batches));
        result.train_accuracy.push_back(accuracy(result.params, data));
    }
    return result;
}

LearningRateSelection select_learning_rate(const ArchitectureSpec& spec, const Dataset& data,
                                           const TrainConfig& config) {
    if (config.learning_rates.empty()) throw std::invalid_argument("select_learning_rate: no candidate rates");
    LearningRateSelection sel;
    bool have = false;
    for (double lr : config.learning_rates) {
        TrainResult run = train(spec, data, config, lr);
        const double acc = run.train_accuracy.back();
        sel.candidates.push_back(lr);
        sel.final_accuracy.push_back(acc);
        const double best_acc = have ? sel.best.train_accuracy.back() : 0.0;
        if (!have || acc > best_acc || (acc == best_acc && lr > sel.best.learning_rate)) {
            sel.best = std::move(run);
            have = true;
        }
    }
    return sel;
}

}  // namespace treelmc
