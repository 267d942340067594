#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "treelmc/evaluation.hpp"
#include "treelmc/matching.hpp"
#include "treelmc/random.hpp"

using namespace treelmc;

namespace {

const TreeKind kKinds[] = {TreeKind::NonOblivious, TreeKind::Oblivious, TreeKind::DecisionList,
                           TreeKind::ModifiedDecisionList};

// B = a random tree permutation of A with a random op applied to every tree.
struct Planted {
    EnsembleParams B;
    Alignment truth;
};

Planted plant(const EnsembleParams& A, std::uint64_t seed) {
    Rng rng(seed);
    const int M = A.spec.trees;
    const auto ops = enumerate_ops(A.spec);
    Planted out;
    out.truth.p.resize(M);
    std::iota(out.truth.p.begin(), out.truth.p.end(), 0);
    rng.shuffle(std::span<int>(out.truth.p));
    out.truth.q.resize(M);
    for (int& q : out.truth.q) q = int(rng.below(ops.size()));
    out.B = A;
    for (int j = 0; j < M; ++j) out.B.trees[j] = adjust_tree(A.trees[out.truth.p[j]], ops[out.truth.q[j]], A.spec);
    return out;
}

Matrix random_samples(int rows, int features, std::uint64_t seed) {
    Rng rng(seed);
    Matrix X(rows, features);
    for (double& v : X.data()) v = rng.normal();
    return X;
}

}  // namespace

TEST(Matching, WeightMatchingRecoversPlantedAlignment) {
    for (TreeKind kind : kKinds) {
        for (int depth = 1; depth <= 3; ++depth) {
            const ArchitectureSpec spec{kind, depth, 12, 16, 3};
            const EnsembleParams A = init_params(spec, 10 + depth);
            const Planted pl = plant(A, 20 + depth);
            const MatchResult r = weight_matching(A, pl.B);
            EXPECT_EQ(apply_alignment(A, r.alignment), pl.B) << describe(spec);
            EXPECT_EQ(r.alignment.p, pl.truth.p) << describe(spec);
        }
    }
}

TEST(Matching, ActivationMatchingRecoversPlantedAlignment) {
    for (TreeKind kind : kKinds) {
        for (int depth = 1; depth <= 3; ++depth) {
            const ArchitectureSpec spec{kind, depth, 12, 16, 3};
            const EnsembleParams A = init_params(spec, 30 + depth);
            const Planted pl = plant(A, 40 + depth);
            const MatchResult r = activation_matching(A, pl.B, random_samples(256, 16, 5));
            EXPECT_EQ(apply_alignment(A, r.alignment), pl.B) << describe(spec);
        }
    }
}

TEST(Matching, SelfMatchIsIdentity) {
    const ArchitectureSpec spec{TreeKind::Oblivious, 2, 8, 5, 2};
    const EnsembleParams A = init_params(spec, 3);
    EXPECT_EQ(weight_matching(A, A).alignment, Alignment::identity(8));
    EXPECT_EQ(activation_matching(A, A, random_samples(64, 5, 1)).alignment, Alignment::identity(8));
}

TEST(Matching, PermutationOnlyUsesIdentityOps) {
    const ArchitectureSpec spec{TreeKind::NonOblivious, 2, 6, 4, 2};
    const EnsembleParams A = init_params(spec, 1), B = init_params(spec, 2);
    const auto X = random_samples(32, 4, 3);
    for (const MatchResult& r : {weight_matching(A, B, false), activation_matching(A, B, X, false),
                                 align(A, B, MatchMethod::Weight, InvarianceLevel::Perm, X)}) {
        EXPECT_EQ(r.alignment.q, std::vector<int>(6, 0));
    }
    EXPECT_EQ(align(A, B, MatchMethod::Activation, InvarianceLevel::Naive, X).alignment, Alignment::identity(6));
}

TEST(Matching, FullObjectiveDominatesPermutationOnly) {
    for (TreeKind kind : kKinds) {
        const ArchitectureSpec spec{kind, 2, 10, 4, 2};
        for (std::uint64_t s = 0; s < 5; ++s) {
            const EnsembleParams A = init_params(spec, 2 * s + 1), B = init_params(spec, 2 * s + 2);
            EXPECT_GE(weight_matching(A, B, true).objective, weight_matching(A, B, false).objective);
        }
    }
}

TEST(Matching, AlignedModelComputesTheSameFunction) {
    for (TreeKind kind : kKinds) {
        const ArchitectureSpec spec{kind, 3, 7, 4, 3};
        const EnsembleParams A = init_params(spec, 5), B = init_params(spec, 6);
        const EnsembleParams aligned = apply_alignment(A, weight_matching(A, B).alignment);
        const Matrix X = random_samples(50, 4, 7);
        const Matrix before = ensemble_logits(A, X), after = ensemble_logits(aligned, X);
        for (std::size_t i = 0; i < before.data().size(); ++i)
            EXPECT_NEAR(before.data()[i], after.data()[i], 1e-12) << describe(spec);
    }
}

TEST(Matching, ErrorsAndValidation) {
    const ArchitectureSpec spec{TreeKind::Oblivious, 2, 4, 3, 2};
    ArchitectureSpec other = spec;
    other.trees = 5;
    const EnsembleParams A = init_params(spec, 1), C = init_params(other, 1);
    EXPECT_THROW(weight_matching(A, C), std::invalid_argument);
    EXPECT_THROW(activation_matching(A, A, Matrix(0, 3)), std::invalid_argument);
    EXPECT_THROW(activation_matching(A, A, Matrix(4, 2)), std::invalid_argument);
    EXPECT_THROW((Alignment{{0, 0, 1, 2}, {0, 0, 0, 0}}.validate(4, 8)), std::invalid_argument);
    EXPECT_THROW((Alignment{{0, 1, 2, 3}, {0, 0, 0, 8}}.validate(4, 8)), std::invalid_argument);
    EXPECT_THROW((Alignment{{0, 1, 2}, {0, 0, 0}}.validate(4, 8)), std::invalid_argument);
    EXPECT_NO_THROW((Alignment{{3, 1, 2, 0}, {7, 0, 0, 1}}.validate(4, 8)));
    const ArchitectureSpec big{TreeKind::NonOblivious, 5, 2, 2, 2};
    const EnsembleParams D = init_params(big, 1);
    EXPECT_THROW(weight_matching(D, D), BudgetExceeded);
    EXPECT_NO_THROW(weight_matching(D, D, false));
    EXPECT_EQ(apply_alignment(D, Alignment::identity(2)), D);
}

TEST(Matching, AlignmentJsonRoundTrip) {
    const ArchitectureSpec spec{TreeKind::Oblivious, 3, 4, 3, 2};
    const Alignment a{{2, 0, 3, 1}, {5, 0, 47, 12}};
    const auto j = alignment_to_json(a, MatchMethod::Activation, InvarianceLevel::Full, spec);
    EXPECT_EQ(j["method"], "am");
    EXPECT_EQ(j["invariances"], "full");
    EXPECT_EQ(alignment_from_json(j, spec), a);
    ArchitectureSpec other = spec;
    other.kind = TreeKind::NonOblivious;
    EXPECT_ANY_THROW(alignment_from_json(j, other));
    for (auto name : {"wm", "am"}) EXPECT_EQ(method_name(parse_method(name)), name);
    for (auto name : {"naive", "perm", "full"}) EXPECT_EQ(level_name(parse_level(name)), name);
    EXPECT_THROW(parse_method("xm"), std::invalid_argument);
    EXPECT_THROW(parse_level("some"), std::invalid_argument);
}
