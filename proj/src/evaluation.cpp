#include "treelmc/evaluation.hpp"

#include <stdexcept>

#include "treelmc/kernels.hpp"
#include "treelmc/training.hpp"

namespace treelmc {

EnsembleParams interpolate(const EnsembleParams& A, const EnsembleParams& B, double lambda) {
    if (!(A.spec == B.spec)) throw std::invalid_argument("interpolate: models do not share an architecture");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("interpolate: lambda must lie in [0, 1]");
    EnsembleParams out = A;
    if (lambda == 1.0) return out;
    if (lambda == 0.0) return B;
    for (std::size_t m = 0; m < out.trees.size(); ++m) {
        kernels::lerp(lambda, A.trees[m].values(), B.trees[m].values(), out.trees[m].values());
    }
    return out;
}

std::vector<double> lambda_grid(int steps) {
    if (steps < 1) throw std::invalid_argument("lambda grid needs at least one step");
    std::vector<double> grid(steps + 1);
    for (int k = 0; k <= steps; ++k) grid[k] = double(k) / double(steps);
    return grid;
}

double accuracy_barrier(std::span<const double> lambdas, std::span<const double> values, double value_a,
                        double value_b) {
    double worst = 0.0;
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
        const double l = lambdas[k];
        // Equal endpoints give an exactly flat reference line.
        const double line = value_a == value_b ? value_a : l * value_a + (1.0 - l) * value_b;
        const double gap = line - values[k];
        if (k == 0 || gap > worst) worst = gap;
    }
    return worst;
}

namespace {

void check_grid(std::span<const double> grid) {
    if (grid.empty()) throw std::invalid_argument("barrier: empty lambda grid");
    bool has0 = false, has1 = false;
    for (double l : grid) {
        if (!(l >= 0.0 && l <= 1.0)) throw std::invalid_argument("barrier: lambda outside [0, 1]");
        has0 |= l == 0.0;
        has1 |= l == 1.0;
    }
    if (!has0 || !has1) throw std::invalid_argument("barrier: grid must contain 0 and 1");
}

}  // namespace

BarrierCurve barrier(const EnsembleParams& A, const EnsembleParams& B, const Dataset& data,
                     std::span<const double> grid) {
    check_grid(grid);
    if (data.size() == 0) throw std::invalid_argument("barrier: empty dataset");
    BarrierCurve curve;
    curve.lambdas.assign(grid.begin(), grid.end());
    curve.accuracy_a = accuracy(A, data);
    curve.accuracy_b = accuracy(B, data);
    for (double l : grid) {
        if (l == 1.0) {
            curve.accuracy.push_back(curve.accuracy_a);
        } else if (l == 0.0) {
            curve.accuracy.push_back(curve.accuracy_b);
        } else {
            curve.accuracy.push_back(accuracy(interpolate(A, B, l), data));
        }
    }
    curve.barrier = accuracy_barrier(curve.lambdas, curve.accuracy, curve.accuracy_a, curve.accuracy_b);
    return curve;
}

double mean_loss(const EnsembleParams& params, const Dataset& data) {
    if (data.size() == 0) throw std::invalid_argument("mean_loss: empty dataset");
    const Matrix logits = ensemble_logits(params, data.features);
    double total = 0.0;
    for (std::size_t r = 0; r < data.size(); ++r) total += cross_entropy(logits.row(r), data.labels[r]);
    return total / double(data.size());
}

LossCurve loss_barrier(const EnsembleParams& A, const EnsembleParams& B, const Dataset& data,
                       std::span<const double> grid) {
    check_grid(grid);
    LossCurve curve;
    curve.lambdas.assign(grid.begin(), grid.end());
    curve.loss_a = mean_loss(A, data);
    curve.loss_b = mean_loss(B, data);
    for (double l : grid) curve.loss.push_back(mean_loss(interpolate(A, B, l), data));
    double worst = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double line = curve.loss_a == curve.loss_b ? curve.loss_a
                                                         : grid[k] * curve.loss_a + (1.0 - grid[k]) * curve.loss_b;
        const double gap = curve.loss[k] - line;
        if (k == 0 || gap > worst) worst = gap;
    }
    curve.barrier = worst;
    return curve;
}

MatchResult align(const EnsembleParams& A, const EnsembleParams& B, MatchMethod method, InvarianceLevel level,
                  const Matrix& am_samples) {
    if (level == InvarianceLevel::Naive) {
        if (!(A.spec == B.spec)) throw std::invalid_argument("align: models do not share an architecture");
        return MatchResult{Alignment::identity(A.spec.trees), 0.0};
    }
    const bool full = level == InvarianceLevel::Full;
    return method == MatchMethod::Weight ? weight_matching(A, B, full) : activation_matching(A, B, am_samples, full);
}

std::vector<SuiteEntry> barrier_suite(const EnsembleParams& A, const EnsembleParams& B, const Dataset& train,
                                      const Dataset& test, MatchMethod method, const Matrix& am_samples,
                                      std::span<const double> grid, std::span<const InvarianceLevel> levels) {
    static constexpr InvarianceLevel kAll[] = {InvarianceLevel::Naive, InvarianceLevel::Perm, InvarianceLevel::Full};
    if (levels.empty()) levels = kAll;
    std::vector<SuiteEntry> out;
    for (InvarianceLevel level : levels) {
        SuiteEntry entry;
        entry.level = level;
        entry.match = align(A, B, method, level, am_samples);
        const EnsembleParams aligned = apply_alignment(A, entry.match.alignment);
        entry.train = barrier(aligned, B, train, grid);
        entry.test = barrier(aligned, B, test, grid);
        out.push_back(std::move(entry));
    }
    return out;
}

}  // namespace treelmc
