#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "treelmc/dataset.hpp"
#include "treelmc/matrix.hpp"

namespace treelmc {

enum class TreeKind { NonOblivious, Oblivious, DecisionList, ModifiedDecisionList };

std::string_view kind_name(TreeKind kind);
/// Accepts the CLI spellings: nonoblivious, oblivious, dlist, dlist-mod.
TreeKind parse_kind(std::string_view name);

struct ArchitectureSpec {
    TreeKind kind = TreeKind::Oblivious;
    int depth = 1;
    int trees = 1;
    int features = 1;
    int classes = 2;

    /// Number of stored (w, b) slots. Oblivious trees store one slot per depth.
    int node_count() const;
    /// Leaves including the fixed empty leaf of the modified decision list.
    int leaf_count() const;
    int trainable_leaf_count() const;
    bool has_empty_leaf() const noexcept { return kind == TreeKind::ModifiedDecisionList; }
    std::size_t params_per_tree() const;

    /// Throws std::invalid_argument on non-positive sizes or an unsupported depth.
    void validate() const;

    friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

std::string describe(const ArchitectureSpec& spec);
/// FNV-1a over the canonical description; stable across runs and platforms.
std::uint64_t spec_hash(const ArchitectureSpec& spec);

// Parameters of one tree in a single contiguous buffer laid out as
// [w | b | pi]: w is node-major (node n owns features [n*F, n*F + F)),
// b has one threshold per node, pi is class-major (C rows of L leaves).
class TreeParams {
public:
    TreeParams() = default;
    explicit TreeParams(const ArchitectureSpec& spec);

    int features() const noexcept { return features_; }
    int nodes() const noexcept { return nodes_; }
    int classes() const noexcept { return classes_; }
    int leaves() const noexcept { return leaves_; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    std::span<double> w() noexcept { return values().subspan(0, w_size()); }
    std::span<const double> w() const noexcept { return values().subspan(0, w_size()); }
    std::span<double> w_node(int n) noexcept { return values().subspan(std::size_t(n) * features_, features_); }
    std::span<const double> w_node(int n) const noexcept {
        return values().subspan(std::size_t(n) * features_, features_);
    }
    std::span<double> b() noexcept { return values().subspan(w_size(), nodes_); }
    std::span<const double> b() const noexcept { return values().subspan(w_size(), nodes_); }
    std::span<double> pi() noexcept { return values().subspan(w_size() + nodes_); }
    std::span<const double> pi() const noexcept { return values().subspan(w_size() + nodes_); }

    double& pi_at(int c, int leaf) noexcept { return values_[w_size() + nodes_ + std::size_t(c) * leaves_ + leaf]; }
    double pi_at(int c, int leaf) const noexcept {
        return values_[w_size() + nodes_ + std::size_t(c) * leaves_ + leaf];
    }

    bool matches(const ArchitectureSpec& spec) const;

    friend bool operator==(const TreeParams&, const TreeParams&) = default;

private:
    std::size_t w_size() const noexcept { return std::size_t(features_) * nodes_; }

    int features_ = 0;
    int nodes_ = 0;
    int classes_ = 0;
    int leaves_ = 0;
    std::vector<double> values_;
};

struct EnsembleParams {
    ArchitectureSpec spec;
    std::vector<TreeParams> trees;

    /// Checks tree count, per-tree shapes, finiteness and the empty-leaf rule.
    void validate() const;

    friend bool operator==(const EnsembleParams&, const EnsembleParams&) = default;
};

/// Zero-valued ensemble with the layout of `spec`.
EnsembleParams zeros_like(const ArchitectureSpec& spec);

// Root-to-leaf routing shared by every architecture: each leaf lists the
// stored node slots on its path and the branch taken. For perfect binary
// trees leaf l encodes its path in its bits (bit d set = went right at
// depth d); nodes are breadth-first with children 2n+1 (left), 2n+2 (right).
// Decision lists chain node d -> node d+1 on the right; the left branch of
// node d ends in leaf d and the right branch of the last node ends in leaf D.
struct PathStep {
    int slot;
    bool right;
};

struct Topology {
    int depth = 0;
    int node_count = 0;
    int leaf_count = 0;
    std::vector<std::vector<PathStep>> leaf_paths;
};

const Topology& topology(const ArchitectureSpec& spec);

/// Overflow-safe logistic function.
double sigmoid(double z) noexcept;

EnsembleParams init_params(const ArchitectureSpec& spec, std::uint64_t seed);

/// Fraction of x routed to each leaf. Sums to 1.
std::vector<double> leaf_flow(std::span<const double> x, const TreeParams& tree,
                              const ArchitectureSpec& spec);
std::vector<double> tree_forward(std::span<const double> x, const TreeParams& tree,
                                 const ArchitectureSpec& spec);
std::vector<double> ensemble_forward(std::span<const double> x, const EnsembleParams& params);

/// Ensemble logits for every row of X (rows x C).
Matrix ensemble_logits(const EnsembleParams& params, const Matrix& X);

/// Per-tree logits: out[m] is (rows x C) for tree m.
std::vector<Matrix> per_tree_logits(const EnsembleParams& params, const Matrix& X);

/// Index of the largest entry; ties go to the lowest index.
int argmax(std::span<const double> v) noexcept;

/// Percentage of rows whose argmax logit equals the label.
double accuracy(const EnsembleParams& params, const Dataset& data);

namespace detail {

// Scratch space for one tree evaluation.
struct TreeWorkspace {
    std::vector<double> left;   // sigma(z) per slot
    std::vector<double> right;  // sigma(-z) per slot
    std::vector<double> flow;   // per leaf
};

void eval_gates(std::span<const double> x, const TreeParams& tree, TreeWorkspace& ws);
void eval_flow(const Topology& topo, TreeWorkspace& ws);
/// out += sum_l flow[l] * pi[:, l]
void accumulate_output(const TreeParams& tree, const TreeWorkspace& ws, std::span<double> out);

}  // namespace detail

}  // namespace treelmc
