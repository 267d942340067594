#include <gtest/gtest.h>

#include <cmath>

#include "treelmc/data.hpp"
#include "treelmc/evaluation.hpp"
#include "treelmc/random.hpp"

using namespace treelmc;

namespace {

const ArchitectureSpec kSpec{TreeKind::Oblivious, 2, 6, 4, 3};

Dataset blobs(std::size_t n, std::uint64_t seed) { return synth_gaussian_blobs(n, 4, 3, 2.0, seed, 2); }

}  // namespace

TEST(Interpolate, EndpointsAreExact) {
    const EnsembleParams A = init_params(kSpec, 1), B = init_params(kSpec, 2);
    EXPECT_EQ(interpolate(A, B, 1.0), A);
    EXPECT_EQ(interpolate(A, B, 0.0), B);
}

TEST(Interpolate, MidpointOfOppositesIsZero) {
    const EnsembleParams A = init_params(kSpec, 1);
    EnsembleParams B = A;
    for (auto& t : B.trees)
        for (double& v : t.values()) v = -v;
    for (const auto& t : interpolate(A, B, 0.5).trees)
        for (double v : t.values()) EXPECT_EQ(v, 0.0);
}

TEST(Interpolate, EntrywiseConvexCombination) {
    const EnsembleParams A = init_params(kSpec, 3), B = init_params(kSpec, 4);
    const EnsembleParams C = interpolate(A, B, 0.25);
    for (std::size_t m = 0; m < A.trees.size(); ++m)
        for (std::size_t i = 0; i < A.trees[m].values().size(); ++i)
            EXPECT_DOUBLE_EQ(C.trees[m].values()[i], 0.25 * A.trees[m].values()[i] + 0.75 * B.trees[m].values()[i]);
}

TEST(Interpolate, EmptyLeafStaysZero) {
    const ArchitectureSpec spec{TreeKind::ModifiedDecisionList, 3, 4, 2, 2};
    const EnsembleParams C = interpolate(init_params(spec, 1), init_params(spec, 2), 0.3);
    EXPECT_NO_THROW(C.validate());
}

TEST(Interpolate, Errors) {
    const EnsembleParams A = init_params(kSpec, 1);
    ArchitectureSpec other = kSpec;
    other.depth = 3;
    EXPECT_THROW(interpolate(A, init_params(other, 1), 0.5), std::invalid_argument);
    EXPECT_THROW(interpolate(A, A, 1.5), std::invalid_argument);
    EXPECT_THROW(interpolate(A, A, -0.1), std::invalid_argument);
    EXPECT_THROW(interpolate(A, A, std::nan("")), std::invalid_argument);
}

TEST(Barrier, DefaultGridHasTwentyFivePoints) {
    const auto g = lambda_grid();
    ASSERT_EQ(g.size(), 25u);
    for (int k = 0; k <= 24; ++k) EXPECT_EQ(g[k], k / 24.0);
    EXPECT_THROW(lambda_grid(0), std::invalid_argument);
}

TEST(Barrier, DirectFormula) {
    const double grid[] = {0.0, 0.5, 1.0};
    const double dip[] = {80.0, 79.0, 80.0};
    EXPECT_DOUBLE_EQ(accuracy_barrier(grid, dip, 80.0, 80.0), 1.0);
    const double flat[] = {70.0, 70.0, 70.0};
    EXPECT_DOUBLE_EQ(accuracy_barrier(grid, flat, 70.0, 70.0), 0.0);
    // Linear endpoint trend: lambda = 0.5 expects 75, measured 60.
    const double slope[] = {70.0, 60.0, 80.0};
    EXPECT_DOUBLE_EQ(accuracy_barrier(grid, slope, 80.0, 70.0), 15.0);
}

TEST(Barrier, SelfInterpolationHasNoBarrier) {
    const EnsembleParams A = init_params(kSpec, 5);
    const Dataset d = blobs(300, 1);
    const auto curve = barrier(A, A, d, lambda_grid());
    for (double acc : curve.accuracy) EXPECT_EQ(acc, accuracy(A, d));
    EXPECT_EQ(curve.barrier, 0.0);
}

TEST(Barrier, EndpointsMatchModelsAndBarrierIsNonnegative) {
    const Dataset d = blobs(400, 2);
    for (std::uint64_t s = 0; s < 4; ++s) {
        const EnsembleParams A = init_params(kSpec, 10 + s), B = init_params(kSpec, 20 + s);
        const auto curve = barrier(A, B, d, lambda_grid(8));
        EXPECT_EQ(curve.accuracy.front(), accuracy(B, d));
        EXPECT_EQ(curve.accuracy.back(), accuracy(A, d));
        EXPECT_EQ(curve.accuracy_a, accuracy(A, d));
        EXPECT_EQ(curve.accuracy_b, accuracy(B, d));
        EXPECT_GE(curve.barrier, 0.0);
        EXPECT_EQ(curve.barrier, accuracy_barrier(curve.lambdas, curve.accuracy, curve.accuracy_a, curve.accuracy_b));
    }
}

TEST(Barrier, Errors) {
    const EnsembleParams A = init_params(kSpec, 5);
    const Dataset d = blobs(30, 1);
    const double no_one[] = {0.0, 0.5};
    EXPECT_THROW(barrier(A, A, d, no_one), std::invalid_argument);
    EXPECT_THROW(barrier(A, A, d, std::span<const double>{}), std::invalid_argument);
    Dataset empty;
    empty.features = Matrix(0, 4);
    empty.classes = 3;
    EXPECT_THROW(barrier(A, A, empty, lambda_grid()), std::invalid_argument);
}

TEST(LossBarrier, ReversedSubtraction) {
    const Dataset d = blobs(200, 3);
    const EnsembleParams A = init_params(kSpec, 1), B = init_params(kSpec, 2);
    const auto grid = lambda_grid(4);
    const auto curve = loss_barrier(A, B, d, grid);
    EXPECT_EQ(curve.loss_a, mean_loss(A, d));
    EXPECT_EQ(curve.loss_b, mean_loss(B, d));
    double worst = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        EXPECT_NEAR(curve.loss[k], mean_loss(interpolate(A, B, grid[k]), d), 1e-15);
        worst = std::max(worst, curve.loss[k] - (grid[k] * curve.loss_a + (1 - grid[k]) * curve.loss_b));
    }
    EXPECT_DOUBLE_EQ(curve.barrier, worst);
    EXPECT_GE(curve.barrier, 0.0);
}

TEST(BarrierSuite, EndpointsAgreeAcrossMethodsAndFullRemovesPlantedBarrier) {
    const Dataset train = blobs(300, 4), test = blobs(300, 5);
    const EnsembleParams A = init_params(kSpec, 7);
    // B is A with trees reversed and every tree flipped at depth 0.
    EnsembleParams B = A;
    for (int j = 0; j < kSpec.trees; ++j)
        B.trees[j] = adjust_tree(A.trees[kSpec.trees - 1 - j], {kSpec.kind, 1, {0, 1}}, kSpec);
    Rng rng(1);
    Matrix X(64, 4);
    for (double& v : X.data()) v = rng.normal();
    for (MatchMethod method : {MatchMethod::Weight, MatchMethod::Activation}) {
        const auto suite = barrier_suite(A, B, train, test, method, X, lambda_grid());
        ASSERT_EQ(suite.size(), 3u);
        EXPECT_EQ(suite[0].level, InvarianceLevel::Naive);
        EXPECT_EQ(suite[2].level, InvarianceLevel::Full);
        for (const auto& e : suite) {
            EXPECT_EQ(e.train.accuracy_a, suite[0].train.accuracy_a);
            EXPECT_EQ(e.train.accuracy_b, suite[0].train.accuracy_b);
            EXPECT_EQ(e.test.accuracy_a, suite[0].test.accuracy_a);
            EXPECT_EQ(e.test.accuracy_b, suite[0].test.accuracy_b);
        }
        const double full_acc = suite[2].test.accuracy_b;
        for (double acc : suite[2].test.accuracy) EXPECT_EQ(acc, full_acc);
        EXPECT_EQ(suite[2].train.barrier, 0.0);
        EXPECT_EQ(suite[2].test.barrier, 0.0);
        EXPECT_GE(suite[2].match.objective, suite[1].match.objective);
    }
}
