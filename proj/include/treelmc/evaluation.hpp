#pragma once

#include <span>
#include <vector>

#include "treelmc/dataset.hpp"
#include "treelmc/matching.hpp"
#include "treelmc/model.hpp"

namespace treelmc {

/// lambda * A + (1 - lambda) * B over every parameter; lambda = 1 is A.
EnsembleParams interpolate(const EnsembleParams& A, const EnsembleParams& B, double lambda);

/// {0, 1/steps, ..., 1}.
std::vector<double> lambda_grid(int steps = 24);

struct BarrierCurve {
    std::vector<double> lambdas;
    std::vector<double> accuracy;  // percent, one per lambda
    double accuracy_a = 0.0;       // endpoint lambda = 1
    double accuracy_b = 0.0;       // endpoint lambda = 0
    double barrier = 0.0;
};

/// max over the grid of lambda*C(A) + (1-lambda)*C(B) - C(interp). Larger C is better.
double accuracy_barrier(std::span<const double> lambdas, std::span<const double> values, double value_a,
                        double value_b);

BarrierCurve barrier(const EnsembleParams& A, const EnsembleParams& B, const Dataset& data,
                     std::span<const double> grid);

double mean_loss(const EnsembleParams& params, const Dataset& data);

struct LossCurve {
    std::vector<double> lambdas;
    std::vector<double> loss;
    double loss_a = 0.0;
    double loss_b = 0.0;
    double barrier = 0.0;  // subtraction reversed: smaller loss is better
};

LossCurve loss_barrier(const EnsembleParams& A, const EnsembleParams& B, const Dataset& data,
                       std::span<const double> grid);

/// Alignment of A onto B at the given invariance level. Naive returns the
/// identity alignment; perm restricts ops to the identity.
MatchResult align(const EnsembleParams& A, const EnsembleParams& B, MatchMethod method, InvarianceLevel level,
                  const Matrix& am_samples);

struct SuiteEntry {
    InvarianceLevel level = InvarianceLevel::Naive;
    MatchResult match;
    BarrierCurve train;
    BarrierCurve test;
};

std::vector<SuiteEntry> barrier_suite(const EnsembleParams& A, const EnsembleParams& B, const Dataset& train,
                                      const Dataset& test, MatchMethod method, const Matrix& am_samples,
                                      std::span<const double> grid,
                                      std::span<const InvarianceLevel> levels = {});

}  // namespace treelmc
