#include "treelmc/invariance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "treelmc/kernels.hpp"

namespace treelmc {

namespace {

void check_kind(const InvarianceOp& op, const ArchitectureSpec& spec) {
    if (op.kind != spec.kind) {
        throw std::invalid_argument("invariance op for " + std::string(kind_name(op.kind)) + " applied to a " +
                                    std::string(kind_name(spec.kind)) + " tree");
    }
}

void negate_node(TreeParams& t, int n) {
    for (double& v : t.w_node(n)) v = -v;
    t.b()[n] = -t.b()[n];
}

void swap_nodes(TreeParams& t, int a, int b) {
    std::swap_ranges(t.w_node(a).begin(), t.w_node(a).end(), t.w_node(b).begin());
    std::swap(t.b()[a], t.b()[b]);
}

void swap_leaves(TreeParams& t, int a, int b) {
    for (int c = 0; c < t.classes(); ++c) std::swap(t.pi_at(c, a), t.pi_at(c, b));
}

// Root-first subtree flips on a perfect binary tree stored breadth-first.
void flip_subtrees(TreeParams& t, std::vector<char>& mask, int node, int depth, int path, int tree_depth) {
    if (mask[node]) {
        negate_node(t, node);
        // Exchange the two child subtrees level by level, together with the
        // mask bits that belong to them.
        for (int level = 0; level < tree_depth - depth - 1; ++level) {
            const int count = 1 << level;
            const int left0 = (2 * node + 2) * count - 1;
            const int right0 = (2 * node + 3) * count - 1;
            for (int i = 0; i < count; ++i) {
                swap_nodes(t, left0 + i, right0 + i);
                std::swap(mask[left0 + i], mask[right0 + i]);
            }
        }
        // Leaves below this node share the low `depth` path bits; bit `depth`
        // selects the side.
        const int low = (1 << depth) - 1;
        for (int leaf = 0; leaf < t.leaves(); ++leaf) {
            if ((leaf & low) == path && !((leaf >> depth) & 1)) swap_leaves(t, leaf, leaf | (1 << depth));
        }
    }
    if (depth + 1 < tree_depth) {
        flip_subtrees(t, mask, 2 * node + 1, depth + 1, path, tree_depth);
        flip_subtrees(t, mask, 2 * node + 2, depth + 1, path | (1 << depth), tree_depth);
    }
}

TreeParams adjust_oblivious(const TreeParams& tree, const InvarianceOp& op, int depth) {
    TreeParams out = tree;
    for (int d = 0; d < depth; ++d) {
        const int src = op.order[d];
        const bool flip = (op.flips >> d) & 1;
        const auto w_src = tree.w_node(src);
        auto w_dst = out.w_node(d);
        for (std::size_t f = 0; f < w_src.size(); ++f) w_dst[f] = flip ? -w_src[f] : w_src[f];
        out.b()[d] = flip ? -tree.b()[src] : tree.b()[src];
    }
    // New path bit at depth d = old bit at depth order[d] XOR flip bit d.
    for (int leaf = 0; leaf < tree.leaves(); ++leaf) {
        int moved = 0;
        for (int d = 0; d < depth; ++d) {
            const int bit = ((leaf >> op.order[d]) & 1) ^ int((op.flips >> d) & 1);
            moved |= bit << d;
        }
        for (int c = 0; c < tree.classes(); ++c) out.pi_at(c, moved) = tree.pi_at(c, leaf);
    }
    return out;
}

}  // namespace

bool InvarianceOp::is_identity() const {
    if (flips != 0) return false;
    for (std::size_t d = 0; d < order.size(); ++d) {
        if (order[d] != static_cast<int>(d)) return false;
    }
    return true;
}

std::string InvarianceOp::describe() const {
    std::ostringstream os;
    os << kind_name(kind) << " flips=0x" << std::hex << flips << std::dec;
    if (!order.empty()) {
        os << " order=";
        for (std::size_t d = 0; d < order.size(); ++d) os << (d ? "," : "") << order[d];
    }
    return os.str();
}

double op_count(const ArchitectureSpec& spec) {
    spec.validate();
    switch (spec.kind) {
    case TreeKind::NonOblivious: return std::ldexp(1.0, (1 << spec.depth) - 1);
    case TreeKind::Oblivious: return std::ldexp(std::tgamma(spec.depth + 1.0), spec.depth);
    case TreeKind::DecisionList: return 2.0;
    case TreeKind::ModifiedDecisionList: return 1.0;
    }
    return 1.0;
}

InvarianceOp identity_op(const ArchitectureSpec& spec) {
    InvarianceOp op{spec.kind, 0, {}};
    if (spec.kind == TreeKind::Oblivious) {
        op.order.resize(spec.depth);
        std::iota(op.order.begin(), op.order.end(), 0);
    }
    return op;
}

std::vector<InvarianceOp> enumerate_ops(const ArchitectureSpec& spec, double budget) {
    const double count = op_count(spec);
    if (count > budget) {
        std::ostringstream os;
        os << "invariance enumeration for " << kind_name(spec.kind) << " depth " << spec.depth << " needs U = " << count
           << " ops, above the budget of " << budget;
        throw BudgetExceeded(os.str());
    }
    std::vector<InvarianceOp> ops;
    ops.reserve(static_cast<std::size_t>(count));
    switch (spec.kind) {
    case TreeKind::NonOblivious: {
        const std::uint64_t masks = std::uint64_t(1) << spec.node_count();
        for (std::uint64_t mask = 0; mask < masks; ++mask) ops.push_back({spec.kind, mask, {}});
        break;
    }
    case TreeKind::Oblivious: {
        std::vector<int> order(spec.depth);
        std::iota(order.begin(), order.end(), 0);
        const std::uint64_t masks = std::uint64_t(1) << spec.depth;
        do {
            for (std::uint64_t mask = 0; mask < masks; ++mask) ops.push_back({spec.kind, mask, order});
        } while (std::next_permutation(order.begin(), order.end()));
        break;
    }
    case TreeKind::DecisionList:
        ops.push_back({spec.kind, 0, {}});
        ops.push_back({spec.kind, 1, {}});
        break;
    case TreeKind::ModifiedDecisionList:
        ops.push_back({spec.kind, 0, {}});
        break;
    }
    return ops;
}

TreeParams adjust_tree(const TreeParams& tree, const InvarianceOp& op, const ArchitectureSpec& spec) {
    check_kind(op, spec);
    if (!tree.matches(spec)) throw std::invalid_argument("adjust_tree: tree does not match spec");
    switch (spec.kind) {
    case TreeKind::NonOblivious: {
        if (spec.node_count() < 64 && (op.flips >> spec.node_count()) != 0) {
            throw std::invalid_argument("adjust_tree: flip mask wider than the tree");
        }
        TreeParams out = tree;
        if (op.flips == 0) return out;
        std::vector<char> mask(spec.node_count());
        for (int n = 0; n < spec.node_count(); ++n) mask[n] = (op.flips >> n) & 1;
        flip_subtrees(out, mask, 0, 0, 0, spec.depth);
        return out;
    }
    case TreeKind::Oblivious: {
        std::vector<int> sorted = op.order;
        std::sort(sorted.begin(), sorted.end());
        bool is_perm = static_cast<int>(op.order.size()) == spec.depth;
        for (int d = 0; is_perm && d < spec.depth; ++d) is_perm = sorted[d] == d;
        if (!is_perm || (op.flips >> spec.depth) != 0) throw std::invalid_argument("adjust_tree: invalid oblivious op");
        return adjust_oblivious(tree, op, spec.depth);
    }
    case TreeKind::DecisionList: {
        if (op.flips > 1) throw std::invalid_argument("adjust_tree: decision lists only have a terminal flip");
        TreeParams out = tree;
        if (op.flips) {
            negate_node(out, spec.depth - 1);
            swap_leaves(out, spec.depth - 1, spec.depth);
        }
        return out;
    }
    case TreeKind::ModifiedDecisionList:
        if (!op.is_identity()) throw std::invalid_argument("adjust_tree: modified decision lists admit only the identity");
        return tree;
    }
    return tree;
}

NodeWeights node_leaf_counts(const ArchitectureSpec& spec) {
    spec.validate();
    NodeWeights w;
    w.leaf.assign(spec.leaf_count(), 1);
    w.node.resize(spec.node_count());
    switch (spec.kind) {
    case TreeKind::NonOblivious:
        for (int n = 0; n < spec.node_count(); ++n) {
            int depth = 0;
            while ((2 << depth) - 1 <= n) ++depth;
            w.node[n] = 1 << (spec.depth - depth);
        }
        break;
    case TreeKind::Oblivious:
        for (int d = 0; d < spec.depth; ++d) w.node[d] = 1 << (spec.depth - d);
        break;
    case TreeKind::DecisionList:
    case TreeKind::ModifiedDecisionList:
        // The empty leaf still counts: it is a rule with zero payoff.
        for (int d = 0; d < spec.depth; ++d) w.node[d] = spec.depth + 1 - d;
        break;
    }
    return w;
}

TreeParams weight_tree(const TreeParams& tree, const NodeWeights& weights) {
    TreeParams out = tree;
    for (int n = 0; n < tree.nodes(); ++n) {
        const double s = std::sqrt(double(weights.node[n]));
        for (double& v : out.w_node(n)) v *= s;
        out.b()[n] *= s;
    }
    for (int l = 0; l < tree.leaves(); ++l) {
        const double s = std::sqrt(double(weights.leaf[l]));
        if (s == 1.0) continue;
        for (int c = 0; c < tree.classes(); ++c) out.pi_at(c, l) *= s;
    }
    return out;
}

EnsembleParams weighting(const EnsembleParams& params) {
    const NodeWeights weights = node_leaf_counts(params.spec);
    EnsembleParams out{params.spec, {}};
    out.trees.reserve(params.trees.size());
    for (const auto& tree : params.trees) out.trees.push_back(weight_tree(tree, weights));
    return out;
}

double tree_inner_product(const TreeParams& a, const TreeParams& b) {
    if (a.values().size() != b.values().size()) throw std::invalid_argument("tree_inner_product: size mismatch");
    return kernels::dot(a.values(), b.values());
}

}  // namespace treelmc
