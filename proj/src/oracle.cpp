#include "treelmc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "treelmc/dataset.hpp"
#include "treelmc/lap.hpp"
#include "treelmc/random.hpp"
#include "treelmc/training.hpp"

namespace treelmc::oracle {

namespace {

double plain_dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double logistic(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

double node_gate(const TreeParams& t, int slot, std::span<const double> x) {
    return logistic(plain_dot(t.w_node(slot), x) + t.b()[slot]);
}

// Descends a perfect binary tree; `slot_of` maps (position, depth) to storage.
template <typename SlotOf>
void descend(const TreeParams& t, std::span<const double> x, int position, int depth, int max_depth, int leaf_bits,
             double mass, const SlotOf& slot_of, std::vector<double>& out) {
    if (depth == max_depth) {
        for (int c = 0; c < t.classes(); ++c) out[c] += mass * t.pi_at(c, leaf_bits);
        return;
    }
    const double g = node_gate(t, slot_of(position, depth), x);
    descend(t, x, 2 * position + 1, depth + 1, max_depth, leaf_bits, mass * g, slot_of, out);
    descend(t, x, 2 * position + 2, depth + 1, max_depth, leaf_bits | (1 << depth), mass * (1.0 - g), slot_of, out);
}

TreeParams random_tree(const ArchitectureSpec& spec, Rng& rng) {
    TreeParams t(spec);
    for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
    if (spec.has_empty_leaf()) {
        for (int c = 0; c < spec.classes; ++c) t.pi_at(c, spec.leaf_count() - 1) = 0.0;
    }
    return t;
}

std::vector<double> random_x(int features, Rng& rng) {
    std::vector<double> x(features);
    for (double& v : x) v = rng.uniform(-2.0, 2.0);
    return x;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

void note(OracleReport& r, double deviation, const std::string& what) {
    r.max_deviation = std::max(r.max_deviation, deviation);
    if (!(deviation < r.tolerance) && !r.first_failure) r.first_failure = what;
}

std::string spec_label(const ArchitectureSpec& spec) {
    return std::string(kind_name(spec.kind)) + " D=" + std::to_string(spec.depth);
}

}  // namespace

std::vector<int> brute_force_lap(const Matrix& S, bool maximize) {
    if (S.rows() != S.cols()) throw std::invalid_argument("brute_force_lap: matrix must be square");
    if (S.rows() > 8) throw std::invalid_argument("brute_force_lap: at most 8x8");
    const int n = static_cast<int>(S.rows());
    std::vector<int> perm(n), best;
    std::iota(perm.begin(), perm.end(), 0);
    double best_value = 0.0;
    do {
        double value = 0.0;
        for (int j = 0; j < n; ++j) value += S(perm[j], j);
        // Permutations arrive in lexicographic order, so only strict
        // improvements replace the incumbent.
        if (best.empty() || (maximize ? value > best_value : value < best_value)) {
            best_value = value;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

ArchitectureSpec expanded_spec(const ArchitectureSpec& oblivious) {
    if (oblivious.kind != TreeKind::Oblivious) throw std::invalid_argument("expand_oblivious: not an oblivious tree");
    ArchitectureSpec out = oblivious;
    out.kind = TreeKind::NonOblivious;
    return out;
}

TreeParams expand_oblivious(const TreeParams& tree, const ArchitectureSpec& spec) {
    const ArchitectureSpec wide = expanded_spec(spec);
    TreeParams out(wide);
    for (int d = 0; d < spec.depth; ++d) {
        for (int position = (1 << d) - 1; position < (2 << d) - 1; ++position) {
            std::copy(tree.w_node(d).begin(), tree.w_node(d).end(), out.w_node(position).begin());
            out.b()[position] = tree.b()[d];
        }
    }
    std::copy(tree.pi().begin(), tree.pi().end(), out.pi().begin());
    return out;
}

std::vector<double> reference_tree_forward(std::span<const double> x, const TreeParams& tree,
                                           const ArchitectureSpec& spec) {
    std::vector<double> out(spec.classes, 0.0);
    switch (spec.kind) {
    case TreeKind::NonOblivious:
        descend(tree, x, 0, 0, spec.depth, 0, 1.0, [](int position, int) { return position; }, out);
        break;
    case TreeKind::Oblivious:
        descend(tree, x, 0, 0, spec.depth, 0, 1.0, [](int, int depth) { return depth; }, out);
        break;
    case TreeKind::DecisionList:
    case TreeKind::ModifiedDecisionList: {
        double remaining = 1.0;
        for (int d = 0; d < spec.depth; ++d) {
            const double g = node_gate(tree, d, x);
            for (int c = 0; c < spec.classes; ++c) out[c] += remaining * g * tree.pi_at(c, d);
            remaining *= 1.0 - g;
        }
        if (spec.kind == TreeKind::DecisionList) {
            for (int c = 0; c < spec.classes; ++c) out[c] += remaining * tree.pi_at(c, spec.depth);
        }
        break;
    }
    }
    return out;
}

OracleReport equivalence_sweep(const ArchitectureSpec& spec, int trials, std::uint64_t seed, const AdjustFn& adjust,
                               double tolerance, int inputs) {
    OracleReport report{"equivalence " + spec_label(spec), 0, 0.0, tolerance, std::nullopt};
    const auto ops = enumerate_ops(spec);
    Rng rng(seed);
    for (int trial = 0; trial < trials; ++trial) {
        const TreeParams tree = random_tree(spec, rng);
        std::vector<std::vector<double>> xs;
        for (int i = 0; i < inputs; ++i) xs.push_back(random_x(spec.features, rng));
        for (std::size_t u = 0; u < ops.size(); ++u) {
            const TreeParams adjusted = adjust(tree, ops[u], spec);
            double dev = 0.0;
            for (const auto& x : xs) {
                dev = std::max(dev, max_abs_diff(reference_tree_forward(x, adjusted, spec),
                                                 reference_tree_forward(x, tree, spec)));
            }
            ++report.cases;
            note(report, dev, "trial " + std::to_string(trial) + " op " + ops[u].describe());
        }
    }
    return report;
}

OracleReport expansion_check(const ArchitectureSpec& spec, int cases, std::uint64_t seed, double tolerance) {
    OracleReport report{"expansion " + spec_label(spec), 0, 0.0, tolerance, std::nullopt};
    const ArchitectureSpec wide = expanded_spec(spec);
    Rng rng(seed);
    for (int i = 0; i < cases; ++i) {
        const TreeParams tree = random_tree(spec, rng);
        const auto x = random_x(spec.features, rng);
        const auto fast = tree_forward(x, tree, spec);
        const auto slow = reference_tree_forward(x, expand_oblivious(tree, spec), wide);
        ++report.cases;
        note(report, max_abs_diff(fast, slow), "case " + std::to_string(i));
    }
    return report;
}

OracleReport gradient_check(const ArchitectureSpec& spec, std::uint64_t seed, double h, double tolerance,
                            std::size_t batch) {
    OracleReport report{"gradient " + describe(spec), 0, 0.0, tolerance, std::nullopt};
    Rng rng(seed);
    EnsembleParams params = init_params(spec, seed);
    // Larger-than-init parameters so every term of the chain rule matters.
    for (auto& t : params.trees) {
        for (double& v : t.values()) v *= 2.0;
        if (spec.has_empty_leaf()) {
            for (int c = 0; c < spec.classes; ++c) t.pi_at(c, spec.leaf_count() - 1) = 0.0;
        }
    }
    Dataset data;
    data.features = Matrix(batch, spec.features);
    data.classes = spec.classes;
    for (std::size_t r = 0; r < batch; ++r) {
        for (int f = 0; f < spec.features; ++f) data.features(r, f) = rng.uniform(-1.5, 1.5);
        data.labels.push_back(static_cast<int>(rng.below(spec.classes)));
    }
    auto loss = [&](const EnsembleParams& p) {
        double total = 0.0;
        for (std::size_t r = 0; r < batch; ++r) {
            std::vector<double> logits(spec.classes, 0.0);
            for (const auto& tree : p.trees) {
                const auto out = reference_tree_forward(data.features.row(r), tree, spec);
                for (int c = 0; c < spec.classes; ++c) logits[c] += out[c];
            }
            double peak = *std::max_element(logits.begin(), logits.end());
            double sum = 0.0;
            for (double v : logits) sum += std::exp(v - peak);
            total += peak + std::log(sum) - logits[data.labels[r]];
        }
        return total / double(batch);
    };

    const Gradients analytic = gradients(params, data);
    for (std::size_t m = 0; m < params.trees.size(); ++m) {
        for (std::size_t i = 0; i < params.trees[m].values().size(); ++i) {
            const bool frozen = spec.has_empty_leaf() && [&] {
                const std::size_t pi_start = std::size_t(spec.node_count()) * (spec.features + 1);
                return i >= pi_start && (i - pi_start) % spec.leaf_count() == std::size_t(spec.leaf_count() - 1);
            }();
            const double g = analytic.grad.trees[m].values()[i];
            double fd = 0.0;
            if (!frozen) {
                auto shifted = [&](double step) {
                    EnsembleParams p = params;
                    p.trees[m].values()[i] += step;
                    return loss(p);
                };
                fd = (8.0 * (shifted(h) - shifted(-h)) - (shifted(2.0 * h) - shifted(-2.0 * h))) / (12.0 * h);
            }
            const double dev = g == fd ? 0.0 : std::abs(g - fd) / std::max(std::abs(g), std::abs(fd));
            ++report.cases;
            std::ostringstream what;
            what << "tree " << m << " entry " << i << " analytic " << g << " numeric " << fd;
            note(report, dev, what.str());
        }
    }
    return report;
}

OracleReport lap_cross_check(int trials, int max_size, std::uint64_t seed) {
    OracleReport report{"assignment", 0, 0.0, 0.0, std::nullopt};
    report.tolerance = 0.0;
    Rng rng(seed);
    for (int t = 0; t < trials; ++t) {
        const int n = 2 + static_cast<int>(rng.below(std::uint64_t(max_size - 1)));
        Matrix S(n, n);
        for (double& v : S.data()) v = rng.uniform(-1.0, 1.0);
        const bool maximize = t % 2 == 0;
        const auto fast = linear_sum_assignment(S, maximize);
        const auto slow = brute_force_lap(S, maximize);
        double fast_value = 0.0, slow_value = 0.0;
        for (int j = 0; j < n; ++j) {
            fast_value += S(fast[j], j);
            slow_value += S(slow[j], j);
        }
        ++report.cases;
        const double dev = std::abs(fast_value - slow_value);
        report.max_deviation = std::max(report.max_deviation, dev);
        if (dev != 0.0 && !report.first_failure) report.first_failure = "trial " + std::to_string(t);
    }
    return report;
}

std::vector<OracleReport> default_suite(std::uint64_t seed) {
    std::vector<OracleReport> out;
    for (TreeKind kind : {TreeKind::NonOblivious, TreeKind::Oblivious, TreeKind::DecisionList,
                          TreeKind::ModifiedDecisionList}) {
        for (int depth = 1; depth <= 3; ++depth) {
            const ArchitectureSpec spec{kind, depth, 2, 3, 2};
            out.push_back(equivalence_sweep(spec, 10, seed + depth));
            out.push_back(gradient_check(spec, seed + 100 + depth));
            if (kind == TreeKind::Oblivious) out.push_back(expansion_check(spec, 100, seed + 200 + depth));
        }
    }
    out.push_back(lap_cross_check(100, 6, seed + 300));
    return out;
}

}  // namespace treelmc::oracle
