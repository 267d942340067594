#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "treelmc/checkpoint.hpp"
#include "treelmc/model.hpp"
#include "treelmc/random.hpp"

using namespace treelmc;

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

TreeParams random_tree(const ArchitectureSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    TreeParams t(spec);
    for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
    if (spec.has_empty_leaf())
        for (int c = 0; c < spec.classes; ++c) t.pi_at(c, spec.leaf_count() - 1) = 0.0;
    return t;
}

}  // namespace

TEST(Model, ShapesPerArchitecture) {
    struct Row {
        TreeKind kind;
        int depth, nodes, leaves, trainable;
    };
    const Row rows[] = {
        {TreeKind::NonOblivious, 1, 1, 2, 2}, {TreeKind::NonOblivious, 3, 7, 8, 8},
        {TreeKind::Oblivious, 1, 1, 2, 2},    {TreeKind::Oblivious, 3, 3, 8, 8},
        {TreeKind::DecisionList, 3, 3, 4, 4}, {TreeKind::ModifiedDecisionList, 3, 3, 4, 3},
    };
    for (const auto& r : rows) {
        const ArchitectureSpec spec{r.kind, r.depth, 2, 5, 3};
        EXPECT_EQ(spec.node_count(), r.nodes) << describe(spec);
        EXPECT_EQ(spec.leaf_count(), r.leaves) << describe(spec);
        EXPECT_EQ(spec.trainable_leaf_count(), r.trainable) << describe(spec);
        EXPECT_EQ(spec.params_per_tree(), std::size_t(r.nodes * 6 + r.leaves * 3)) << describe(spec);
    }
}

TEST(Model, SpecValidation) {
    EXPECT_THROW((ArchitectureSpec{TreeKind::Oblivious, 0, 1, 1, 2}.validate()), std::invalid_argument);
    EXPECT_THROW((ArchitectureSpec{TreeKind::Oblivious, 2, 0, 1, 2}.validate()), std::invalid_argument);
    EXPECT_THROW((ArchitectureSpec{TreeKind::Oblivious, 2, 1, 0, 2}.validate()), std::invalid_argument);
    EXPECT_THROW((ArchitectureSpec{TreeKind::Oblivious, 2, 1, 1, 0}.validate()), std::invalid_argument);
    EXPECT_NO_THROW((ArchitectureSpec{TreeKind::DecisionList, 2, 1, 1, 2}.validate()));
    EXPECT_THROW(parse_kind("forest"), std::invalid_argument);
    for (TreeKind k : {TreeKind::NonOblivious, TreeKind::Oblivious, TreeKind::DecisionList,
                       TreeKind::ModifiedDecisionList})
        EXPECT_EQ(parse_kind(kind_name(k)), k);
}

TEST(Model, SpecHashDistinguishesSpecs) {
    const ArchitectureSpec a{TreeKind::Oblivious, 2, 4, 3, 2};
    ArchitectureSpec b = a;
    EXPECT_EQ(spec_hash(a), spec_hash(b));
    b.trees = 5;
    EXPECT_NE(spec_hash(a), spec_hash(b));
    b = a;
    b.kind = TreeKind::NonOblivious;
    EXPECT_NE(spec_hash(a), spec_hash(b));
}

TEST(Model, SigmoidIsStableAndSymmetric) {
    EXPECT_EQ(sigmoid(0.0), 0.5);
    EXPECT_EQ(sigmoid(1000.0), 1.0);
    EXPECT_EQ(sigmoid(-1000.0), 0.0);
    EXPECT_FALSE(std::isnan(sigmoid(-std::numeric_limits<double>::infinity())));
    for (double z : {-7.5, -1.0, 0.3, 4.0}) {
        EXPECT_NEAR(sigmoid(z) + sigmoid(-z), 1.0, 1e-15);
        EXPECT_NEAR(sigmoid(z), logistic(z), 1e-15);
    }
}

TEST(Model, ObliviousDepthTwoMatchesHandExpansion) {
    const ArchitectureSpec spec{TreeKind::Oblivious, 2, 1, 2, 2};
    TreeParams t(spec);
    const double w0[] = {0.5, -1.0}, w1[] = {2.0, 0.25};
    std::copy(w0, w0 + 2, t.w_node(0).begin());
    std::copy(w1, w1 + 2, t.w_node(1).begin());
    t.b()[0] = 0.1;
    t.b()[1] = -0.3;
    for (int l = 0; l < 4; ++l) {
        t.pi_at(0, l) = 1.0 + l;
        t.pi_at(1, l) = -2.0 * l;
    }
    const double x[] = {0.7, -0.2};
    const double g0 = logistic(0.5 * 0.7 + 1.0 * 0.2 + 0.1);
    const double g1 = logistic(2.0 * 0.7 - 0.25 * 0.2 - 0.3);
    // Leaf bit d set = went right at depth d.
    const double mu[] = {g0 * g1, (1 - g0) * g1, g0 * (1 - g1), (1 - g0) * (1 - g1)};
    const auto flow = leaf_flow(x, t, spec);
    const auto out = tree_forward(x, t, spec);
    double e0 = 0, e1 = 0;
    for (int l = 0; l < 4; ++l) {
        EXPECT_NEAR(flow[l], mu[l], 1e-15);
        e0 += mu[l] * (1.0 + l);
        e1 += mu[l] * (-2.0 * l);
    }
    EXPECT_NEAR(out[0], e0, 1e-14);
    EXPECT_NEAR(out[1], e1, 1e-14);
}

TEST(Model, NonObliviousDepthTwoUsesBreadthFirstChildren) {
    const ArchitectureSpec spec{TreeKind::NonOblivious, 2, 1, 1, 1};
    TreeParams t(spec);
    const double w[] = {1.0, -0.5, 2.0}, b[] = {0.2, 0.1, -0.4};
    for (int n = 0; n < 3; ++n) {
        t.w_node(n)[0] = w[n];
        t.b()[n] = b[n];
    }
    const double x[] = {0.6};
    const double g0 = logistic(0.8), g1 = logistic(-0.2), g2 = logistic(0.8);
    const double mu[] = {g0 * g1, (1 - g0) * g2, g0 * (1 - g1), (1 - g0) * (1 - g2)};
    const auto flow = leaf_flow(x, t, spec);
    for (int l = 0; l < 4; ++l) EXPECT_NEAR(flow[l], mu[l], 1e-15) << l;
}

TEST(Model, DecisionListsChainToTheRight) {
    for (TreeKind kind : {TreeKind::DecisionList, TreeKind::ModifiedDecisionList}) {
        const ArchitectureSpec spec{kind, 2, 1, 1, 1};
        TreeParams t(spec);
        t.w_node(0)[0] = 1.5;
        t.w_node(1)[0] = -1.0;
        t.b()[0] = -0.1;
        t.b()[1] = 0.4;
        const double x[] = {0.3};
        const double g0 = logistic(0.35), g1 = logistic(0.1);
        const auto flow = leaf_flow(x, t, spec);
        ASSERT_EQ(flow.size(), 3u);
        EXPECT_NEAR(flow[0], g0, 1e-15);
        EXPECT_NEAR(flow[1], (1 - g0) * g1, 1e-15);
        EXPECT_NEAR(flow[2], (1 - g0) * (1 - g1), 1e-15);
    }
}

TEST(Model, LeafFlowSumsToOne) {
    Rng rng(3);
    for (TreeKind kind : {TreeKind::NonOblivious, TreeKind::Oblivious, TreeKind::DecisionList,
                          TreeKind::ModifiedDecisionList}) {
        for (int depth = 1; depth <= 4; ++depth) {
            const ArchitectureSpec spec{kind, depth, 1, 4, 2};
            const TreeParams t = random_tree(spec, 100 + depth);
            for (int trial = 0; trial < 20; ++trial) {
                std::vector<double> x(4);
                for (double& v : x) v = rng.uniform(-3, 3);
                double s = 0;
                for (double f : leaf_flow(x, t, spec)) {
                    EXPECT_GE(f, 0.0);
                    s += f;
                }
                EXPECT_NEAR(s, 1.0, 1e-14) << describe(spec);
            }
        }
    }
}

TEST(Model, EnsembleSumsTreesInOrder) {
    const ArchitectureSpec spec{TreeKind::NonOblivious, 2, 5, 3, 4};
    const EnsembleParams p = init_params(spec, 9);
    const double x[] = {0.2, -1.0, 0.5};
    std::vector<double> expect(4, 0.0);
    for (const auto& t : p.trees) {
        const auto o = tree_forward(x, t, spec);
        for (int c = 0; c < 4; ++c) expect[c] += o[c];
    }
    EXPECT_EQ(ensemble_forward(x, p), expect);

    Matrix X(2, 3);
    X(0, 0) = 0.2, X(0, 1) = -1.0, X(0, 2) = 0.5, X(1, 0) = 1.0;
    const Matrix logits = ensemble_logits(p, X);
    const auto per_tree = per_tree_logits(p, X);
    ASSERT_EQ(per_tree.size(), 5u);
    for (std::size_t r = 0; r < 2; ++r) {
        for (int c = 0; c < 4; ++c) {
            double s = 0;
            for (const auto& m : per_tree) s += m(r, c);
            EXPECT_NEAR(logits(r, c), s, 1e-14);
        }
    }
    for (int c = 0; c < 4; ++c) EXPECT_EQ(logits(0, c), expect[c]);
}

TEST(Model, ArgmaxTiesGoToLowestIndex) {
    const double v[] = {1.0, 3.0, 3.0, 2.0};
    EXPECT_EQ(argmax(v), 1);
    const double flat[] = {0.0, 0.0};
    EXPECT_EQ(argmax(flat), 0);
}

TEST(Model, AccuracyCountsArgmaxHits) {
    const ArchitectureSpec spec{TreeKind::DecisionList, 1, 1, 1, 2};
    EnsembleParams p = zeros_like(spec);
    p.trees[0].w_node(0)[0] = 10.0;  // x > 0 goes left
    p.trees[0].pi_at(0, 0) = 1.0;    // left leaf votes class 0
    p.trees[0].pi_at(1, 1) = 1.0;
    Dataset d;
    d.features = Matrix(4, 1);
    d.features(0, 0) = 1, d.features(1, 0) = 2, d.features(2, 0) = -1, d.features(3, 0) = -2;
    d.labels = {0, 0, 1, 0};
    d.classes = 2;
    EXPECT_DOUBLE_EQ(accuracy(p, d), 75.0);
    Dataset empty;
    empty.classes = 2;
    EXPECT_THROW(accuracy(p, empty), std::invalid_argument);
}

TEST(Model, InitIsSeededAndBounded) {
    const ArchitectureSpec spec{TreeKind::ModifiedDecisionList, 3, 4, 9, 2};
    const EnsembleParams a = init_params(spec, 1), b = init_params(spec, 1), c = init_params(spec, 2);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    for (const auto& t : a.trees) {
        for (double w : t.w()) EXPECT_LE(std::abs(w), 1.0 / 3.0);
        for (int cl = 0; cl < 2; ++cl) {
            for (int l = 0; l < 3; ++l) EXPECT_LE(std::abs(t.pi_at(cl, l)), 1.0 / 2.0);
            EXPECT_EQ(t.pi_at(cl, 3), 0.0);
        }
    }
    EXPECT_NO_THROW(a.validate());
}

TEST(Model, ValidateRejectsBadParameters) {
    const ArchitectureSpec spec{TreeKind::ModifiedDecisionList, 2, 2, 3, 2};
    EnsembleParams p = init_params(spec, 4);
    p.trees[1].pi_at(1, 2) = 0.5;
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = init_params(spec, 4);
    p.trees[0].b()[0] = std::nan("");
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = init_params(spec, 4);
    p.trees.pop_back();
    EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Checkpoint, RoundTripIsExact) {
    for (TreeKind kind : {TreeKind::NonOblivious, TreeKind::Oblivious, TreeKind::ModifiedDecisionList}) {
        const ArchitectureSpec spec{kind, 3, 3, 4, 3};
        const EnsembleParams p = init_params(spec, 77);
        EXPECT_EQ(checkpoint_from_json(checkpoint_to_json(p)), p);
        const auto path = std::filesystem::temp_directory_path() / "treelmc_ckpt_test" / "m.json";
        save_checkpoint(path, p, {{"seed", 77}});
        EXPECT_EQ(load_checkpoint(path), p);
        EXPECT_EQ(read_json_file(path)["seed"], 77);
    }
}

TEST(Checkpoint, RejectsMalformedInput) {
    const ArchitectureSpec spec{TreeKind::Oblivious, 2, 2, 3, 2};
    auto j = checkpoint_to_json(init_params(spec, 1));
    auto bad = j;
    bad["format_version"] = 99;
    EXPECT_ANY_THROW(checkpoint_from_json(bad));
    bad = j;
    bad["trees"].erase(0);
    EXPECT_ANY_THROW(checkpoint_from_json(bad));
    bad = j;
    bad["trees"][0]["b"].push_back(1.0);
    EXPECT_ANY_THROW(checkpoint_from_json(bad));
    EXPECT_ANY_THROW(load_checkpoint("/nonexistent/treelmc.json"));
}
