#include <gtest/gtest.h>

#include "treelmc/oracle.hpp"
#include "treelmc/random.hpp"

using namespace treelmc;

TEST(BruteForceLap, SmallCases) {
    Matrix S(2, 2);
    S(0, 0) = 5, S(1, 1) = 4, S(0, 1) = 1, S(1, 0) = 1;
    EXPECT_EQ(oracle::brute_force_lap(S, true), (std::vector<int>{0, 1}));
    EXPECT_EQ(oracle::brute_force_lap(S, false), (std::vector<int>{1, 0}));
    EXPECT_EQ(oracle::brute_force_lap(Matrix(5, 5, 2.0), true), (std::vector<int>{0, 1, 2, 3, 4}));
    EXPECT_THROW(oracle::brute_force_lap(Matrix(9, 9), true), std::invalid_argument);
    EXPECT_THROW(oracle::brute_force_lap(Matrix(2, 3), true), std::invalid_argument);
}

TEST(BruteForceLap, CrossCheckReport) {
    const auto r = oracle::lap_cross_check(100, 6, 9);
    EXPECT_TRUE(r.passed()) << r.first_failure.value_or("");
    EXPECT_EQ(r.cases, 100u);
    EXPECT_EQ(r.max_deviation, 0.0);
}

TEST(ExpandOblivious, CopiesDepthSlotsIntoEveryPosition) {
    const ArchitectureSpec spec{TreeKind::Oblivious, 2, 1, 3, 2};
    const EnsembleParams p = init_params(spec, 4);
    const TreeParams wide = oracle::expand_oblivious(p.trees[0], spec);
    EXPECT_EQ(wide.nodes(), 3);
    EXPECT_EQ(wide.b()[0], p.trees[0].b()[0]);
    EXPECT_EQ(wide.b()[1], p.trees[0].b()[1]);
    EXPECT_EQ(wide.b()[2], p.trees[0].b()[1]);
    for (int f = 0; f < 3; ++f) EXPECT_EQ(wide.w_node(2)[f], p.trees[0].w_node(1)[f]);
    EXPECT_TRUE(std::equal(wide.pi().begin(), wide.pi().end(), p.trees[0].pi().begin()));

    const ArchitectureSpec one{TreeKind::Oblivious, 1, 1, 3, 2};
    const TreeParams t1 = init_params(one, 2).trees[0];
    const TreeParams e1 = oracle::expand_oblivious(t1, one);
    EXPECT_TRUE(std::equal(e1.values().begin(), e1.values().end(), t1.values().begin(), t1.values().end()));

    EXPECT_THROW(oracle::expand_oblivious(t1, {TreeKind::NonOblivious, 1, 1, 3, 2}), std::invalid_argument);
}

TEST(ExpandOblivious, ForwardMatchesForHundredCases) {
    for (int depth = 1; depth <= 3; ++depth) {
        const auto r = oracle::expansion_check({TreeKind::Oblivious, depth, 1, 4, 3}, 100, depth);
        EXPECT_TRUE(r.passed());
        EXPECT_EQ(r.cases, 100u);
        EXPECT_LT(r.max_deviation, 1e-12);
    }
}

TEST(ReferenceForward, AgreesWithLibraryForward) {
    Rng rng(5);
    for (TreeKind kind : {TreeKind::NonOblivious, TreeKind::Oblivious, TreeKind::DecisionList,
                          TreeKind::ModifiedDecisionList}) {
        for (int depth = 1; depth <= 4; ++depth) {
            const ArchitectureSpec spec{kind, depth, 1, 3, 2};
            const TreeParams t = init_params(spec, depth).trees[0];
            for (int i = 0; i < 10; ++i) {
                const double x[] = {rng.normal(), rng.normal(), rng.normal()};
                const auto a = tree_forward(x, t, spec), b = oracle::reference_tree_forward(x, t, spec);
                for (int c = 0; c < 2; ++c) EXPECT_NEAR(a[c], b[c], 1e-14) << describe(spec);
            }
        }
    }
}

TEST(EquivalenceSweep, Examples) {
    const auto nonobl = oracle::equivalence_sweep({TreeKind::NonOblivious, 2, 1, 3, 2}, 10, 1);
    EXPECT_TRUE(nonobl.passed());
    EXPECT_EQ(nonobl.cases, 80u);
    EXPECT_GT(nonobl.max_deviation, 0.0);  // rounding is recorded even on success

    const auto mod = oracle::equivalence_sweep({TreeKind::ModifiedDecisionList, 3, 1, 3, 2}, 10, 1);
    EXPECT_TRUE(mod.passed());
    EXPECT_EQ(mod.max_deviation, 0.0);

    const auto obl = oracle::equivalence_sweep({TreeKind::Oblivious, 3, 1, 3, 2}, 5, 1);
    EXPECT_TRUE(obl.passed());
    EXPECT_EQ(obl.cases, 5u * 48u);

    EXPECT_THROW(oracle::equivalence_sweep({TreeKind::NonOblivious, 5, 1, 3, 2}, 1, 1), BudgetExceeded);
}

// Mutants of adjust_tree must be caught with a large deviation.
TEST(EquivalenceSweep, DetectsInjectedSignBugs) {
    const auto drop_bias_flip = [](const TreeParams& t, const InvarianceOp& op, const ArchitectureSpec& spec) {
        TreeParams out = adjust_tree(t, op, spec);
        if (!op.is_identity())
            for (int n = 0; n < out.nodes(); ++n) out.b()[n] = t.b()[n];
        return out;
    };
    const auto no_leaf_swap = [](const TreeParams& t, const InvarianceOp& op, const ArchitectureSpec& spec) {
        TreeParams out = adjust_tree(t, op, spec);
        std::copy(t.pi().begin(), t.pi().end(), out.pi().begin());
        return out;
    };
    for (TreeKind kind : {TreeKind::NonOblivious, TreeKind::Oblivious, TreeKind::DecisionList}) {
        const ArchitectureSpec spec{kind, 2, 1, 3, 2};
        for (const auto& mutant : {oracle::AdjustFn(drop_bias_flip), oracle::AdjustFn(no_leaf_swap)}) {
            const auto r = oracle::equivalence_sweep(spec, 10, 3, mutant);
            EXPECT_FALSE(r.passed()) << describe(spec);
            EXPECT_GT(r.max_deviation, 0.1) << describe(spec);
            EXPECT_TRUE(r.first_failure.has_value());
        }
    }
}

TEST(GradientCheck, DefaultSuitePasses) {
    for (const auto& r : oracle::default_suite(2)) {
        EXPECT_TRUE(r.passed()) << r.name << " " << r.first_failure.value_or("");
        EXPECT_GT(r.cases, 0u);
    }
}

TEST(GradientCheck, ReportsFailureAgainstZeroTolerance) {
    // Finite differences never agree exactly, so a zero tolerance must fail.
    const auto r = oracle::gradient_check({TreeKind::Oblivious, 2, 2, 3, 2}, 1, 1e-3, 0.0);
    EXPECT_FALSE(r.passed());
    EXPECT_GT(r.max_deviation, 0.0);
}
