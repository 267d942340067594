#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "treelmc/model.hpp"

namespace treelmc {

// One function-preserving reparameterization of a single tree.
//   NonOblivious: `flips` bit n set = flip at breadth-first node position n,
//                 applied root-first with the mask riding along with swapped subtrees.
//   Oblivious:    `order[d]` = original depth placed at depth d; `flips` bit d
//                 negates the rule that lands at depth d.
//   DecisionList: `flips` bit 0 = flip the terminal split.
//   ModifiedDecisionList: identity only.
struct InvarianceOp {
    TreeKind kind = TreeKind::NonOblivious;
    std::uint64_t flips = 0;
    std::vector<int> order;

    bool is_identity() const;
    std::string describe() const;

    friend bool operator==(const InvarianceOp&, const InvarianceOp&) = default;
};

inline constexpr double kDefaultOpBudget = 1e6;

class BudgetExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// U for the architecture: 2^(2^D - 1), 2^D * D!, 2 or 1. Returned as a
/// double because it overflows 64 bits quickly for non-oblivious trees.
double op_count(const ArchitectureSpec& spec);

InvarianceOp identity_op(const ArchitectureSpec& spec);

/// All ops, identity first, in a fixed order. Throws BudgetExceeded (naming U)
/// when U is larger than `budget`.
std::vector<InvarianceOp> enumerate_ops(const ArchitectureSpec& spec, double budget = kDefaultOpBudget);

TreeParams adjust_tree(const TreeParams& tree, const InvarianceOp& op, const ArchitectureSpec& spec);

/// Number of leaves each stored split affects under the rule-set reading;
/// leaves weigh 1.
struct NodeWeights {
    std::vector<int> node;
    std::vector<int> leaf;
};

NodeWeights node_leaf_counts(const ArchitectureSpec& spec);

/// Copy with every (w_n, b_n) scaled by sqrt(weight_n); leaf values unchanged.
TreeParams weight_tree(const TreeParams& tree, const NodeWeights& weights);
EnsembleParams weighting(const EnsembleParams& params);

/// Flattened inner product of two trees' parameter buffers.
double tree_inner_product(const TreeParams& a, const TreeParams& b);

}  // namespace treelmc
