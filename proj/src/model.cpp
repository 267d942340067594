#include "treelmc/model.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <utility>

#include "treelmc/kernels.hpp"
#include "treelmc/random.hpp"

namespace treelmc {

namespace {

constexpr int kMaxPerfectDepth = 20;
constexpr int kMaxListDepth = 4096;

bool is_perfect(TreeKind kind) {
    return kind == TreeKind::NonOblivious || kind == TreeKind::Oblivious;
}

Topology build_topology(TreeKind kind, int depth) {
    Topology topo;
    topo.depth = depth;
    if (is_perfect(kind)) {
        topo.leaf_count = 1 << depth;
        topo.node_count = kind == TreeKind::NonOblivious ? (1 << depth) - 1 : depth;
        topo.leaf_paths.resize(topo.leaf_count);
        for (int leaf = 0; leaf < topo.leaf_count; ++leaf) {
            auto& path = topo.leaf_paths[leaf];
            path.reserve(depth);
            int node = 0;
            for (int d = 0; d < depth; ++d) {
                const bool right = (leaf >> d) & 1;
                path.push_back({kind == TreeKind::NonOblivious ? node : d, right});
                node = 2 * node + 1 + (right ? 1 : 0);
            }
        }
    } else {
        topo.node_count = depth;
        topo.leaf_count = depth + 1;
        topo.leaf_paths.resize(topo.leaf_count);
        for (int leaf = 0; leaf <= depth; ++leaf) {
            auto& path = topo.leaf_paths[leaf];
            for (int d = 0; d < leaf && d < depth; ++d) path.push_back({d, true});
            if (leaf < depth) path.push_back({leaf, false});
        }
    }
    return topo;
}

}  // namespace

std::string_view kind_name(TreeKind kind) {
    switch (kind) {
    case TreeKind::NonOblivious: return "nonoblivious";
    case TreeKind::Oblivious: return "oblivious";
    case TreeKind::DecisionList: return "dlist";
    case TreeKind::ModifiedDecisionList: return "dlist-mod";
    }
    return "unknown";
}

TreeKind parse_kind(std::string_view name) {
    for (TreeKind k : {TreeKind::NonOblivious, TreeKind::Oblivious, TreeKind::DecisionList,
                       TreeKind::ModifiedDecisionList}) {
        if (name == kind_name(k)) return k;
    }
    throw std::invalid_argument("unknown tree architecture '" + std::string(name) + "'");
}

int ArchitectureSpec::node_count() const {
    switch (kind) {
    case TreeKind::NonOblivious: return (1 << depth) - 1;
    default: return depth;
    }
}

int ArchitectureSpec::leaf_count() const { return is_perfect(kind) ? 1 << depth : depth + 1; }

int ArchitectureSpec::trainable_leaf_count() const { return leaf_count() - (has_empty_leaf() ? 1 : 0); }

std::size_t ArchitectureSpec::params_per_tree() const {
    return std::size_t(node_count()) * (features + 1) + std::size_t(classes) * leaf_count();
}

void ArchitectureSpec::validate() const {
    if (depth < 1) throw std::invalid_argument("depth must be positive");
    if (trees < 1) throw std::invalid_argument("tree count must be positive");
    if (features < 1) throw std::invalid_argument("feature count must be positive");
    if (classes < 1) throw std::invalid_argument("class count must be positive");
    const int limit = is_perfect(kind) ? kMaxPerfectDepth : kMaxListDepth;
    if (depth > limit) {
        throw std::invalid_argument("depth " + std::to_string(depth) + " exceeds the supported maximum " +
                                    std::to_string(limit) + " for " + std::string(kind_name(kind)));
    }
}

std::string describe(const ArchitectureSpec& spec) {
    return "kind=" + std::string(kind_name(spec.kind)) + " depth=" + std::to_string(spec.depth) +
           " trees=" + std::to_string(spec.trees) + " features=" + std::to_string(spec.features) +
           " classes=" + std::to_string(spec.classes);
}

std::uint64_t spec_hash(const ArchitectureSpec& spec) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : describe(spec)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

TreeParams::TreeParams(const ArchitectureSpec& spec)
    : features_(spec.features),
      nodes_(spec.node_count()),
      classes_(spec.classes),
      leaves_(spec.leaf_count()),
      values_(spec.params_per_tree(), 0.0) {}

bool TreeParams::matches(const ArchitectureSpec& spec) const {
    return features_ == spec.features && nodes_ == spec.node_count() && classes_ == spec.classes &&
           leaves_ == spec.leaf_count() && values_.size() == spec.params_per_tree();
}

void EnsembleParams::validate() const {
    spec.validate();
    if (trees.size() != static_cast<std::size_t>(spec.trees)) {
        throw std::invalid_argument("ensemble holds " + std::to_string(trees.size()) + " trees, spec says " +
                                    std::to_string(spec.trees));
    }
    for (std::size_t m = 0; m < trees.size(); ++m) {
        const auto& tree = trees[m];
        if (!tree.matches(spec)) throw std::invalid_argument("tree " + std::to_string(m) + " shape mismatch");
        for (double v : tree.values()) {
            if (!std::isfinite(v)) throw std::invalid_argument("tree " + std::to_string(m) + " has a non-finite parameter");
        }
        if (spec.has_empty_leaf()) {
            for (int c = 0; c < spec.classes; ++c) {
                if (tree.pi_at(c, spec.leaf_count() - 1) != 0.0) {
                    throw std::invalid_argument("tree " + std::to_string(m) + ": empty leaf must stay zero");
                }
            }
        }
    }
}

EnsembleParams zeros_like(const ArchitectureSpec& spec) {
    spec.validate();
    EnsembleParams out{spec, {}};
    out.trees.assign(spec.trees, TreeParams(spec));
    return out;
}

const Topology& topology(const ArchitectureSpec& spec) {
    static std::mutex mu;
    static std::map<std::pair<TreeKind, int>, std::unique_ptr<Topology>> cache;
    std::lock_guard lock(mu);
    auto& entry = cache[{spec.kind, spec.depth}];
    if (!entry) entry = std::make_unique<Topology>(build_topology(spec.kind, spec.depth));
    return *entry;
}

double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

EnsembleParams init_params(const ArchitectureSpec& spec, std::uint64_t seed) {
    EnsembleParams params = zeros_like(spec);
    Rng rng(seed);
    const double split_bound = 1.0 / std::sqrt(double(spec.features));
    const double leaf_bound = 1.0 / std::sqrt(double(spec.leaf_count()));
    for (auto& tree : params.trees) {
        for (double& v : tree.w()) v = rng.uniform(-split_bound, split_bound);
        for (double& v : tree.b()) v = rng.uniform(-split_bound, split_bound);
        for (double& v : tree.pi()) v = rng.uniform(-leaf_bound, leaf_bound);
        if (spec.has_empty_leaf()) {
            for (int c = 0; c < spec.classes; ++c) tree.pi_at(c, spec.leaf_count() - 1) = 0.0;
        }
    }
    return params;
}

namespace detail {

void eval_gates(std::span<const double> x, const TreeParams& tree, TreeWorkspace& ws) {
    const int nodes = tree.nodes();
    ws.left.resize(nodes);
    ws.right.resize(nodes);
    const auto bias = tree.b();
    for (int n = 0; n < nodes; ++n) {
        const double z = kernels::dot(tree.w_node(n), x) + bias[n];
        ws.left[n] = sigmoid(z);
        ws.right[n] = sigmoid(-z);
    }
}

void eval_flow(const Topology& topo, TreeWorkspace& ws) {
    ws.flow.resize(topo.leaf_count);
    for (int leaf = 0; leaf < topo.leaf_count; ++leaf) {
        double p = 1.0;
        for (const PathStep& step : topo.leaf_paths[leaf]) p *= step.right ? ws.right[step.slot] : ws.left[step.slot];
        ws.flow[leaf] = p;
    }
}

void accumulate_output(const TreeParams& tree, const TreeWorkspace& ws, std::span<double> out) {
    const int leaves = tree.leaves();
    const auto pi = tree.pi();
    for (int c = 0; c < tree.classes(); ++c) {
        out[c] += kernels::dot(pi.subspan(std::size_t(c) * leaves, leaves), ws.flow);
    }
}

}  // namespace detail

std::vector<double> leaf_flow(std::span<const double> x, const TreeParams& tree, const ArchitectureSpec& spec) {
    detail::TreeWorkspace ws;
    detail::eval_gates(x, tree, ws);
    detail::eval_flow(topology(spec), ws);
    return ws.flow;
}

std::vector<double> tree_forward(std::span<const double> x, const TreeParams& tree, const ArchitectureSpec& spec) {
    detail::TreeWorkspace ws;
    detail::eval_gates(x, tree, ws);
    detail::eval_flow(topology(spec), ws);
    std::vector<double> out(spec.classes, 0.0);
    detail::accumulate_output(tree, ws, out);
    return out;
}

std::vector<double> ensemble_forward(std::span<const double> x, const EnsembleParams& params) {
    const Topology& topo = topology(params.spec);
    detail::TreeWorkspace ws;
    std::vector<double> out(params.spec.classes, 0.0);
    std::vector<double> tree_out(params.spec.classes);
    for (const auto& tree : params.trees) {
        std::fill(tree_out.begin(), tree_out.end(), 0.0);
        detail::eval_gates(x, tree, ws);
        detail::eval_flow(topo, ws);
        detail::accumulate_output(tree, ws, tree_out);
        for (int c = 0; c < params.spec.classes; ++c) out[c] += tree_out[c];
    }
    return out;
}

Matrix ensemble_logits(const EnsembleParams& params, const Matrix& X) {
    if (X.cols() != static_cast<std::size_t>(params.spec.features)) {
        throw std::invalid_argument("input has " + std::to_string(X.cols()) + " features, model expects " +
                                    std::to_string(params.spec.features));
    }
    Matrix out(X.rows(), params.spec.classes);
    for (std::size_t r = 0; r < X.rows(); ++r) {
        const auto logits = ensemble_forward(X.row(r), params);
        std::copy(logits.begin(), logits.end(), out.row(r).begin());
    }
    return out;
}

std::vector<Matrix> per_tree_logits(const EnsembleParams& params, const Matrix& X) {
    if (X.cols() != static_cast<std::size_t>(params.spec.features)) {
        throw std::invalid_argument("sample matrix has the wrong feature count");
    }
    const Topology& topo = topology(params.spec);
    detail::TreeWorkspace ws;
    std::vector<Matrix> out(params.trees.size(), Matrix(X.rows(), params.spec.classes));
    for (std::size_t m = 0; m < params.trees.size(); ++m) {
        for (std::size_t r = 0; r < X.rows(); ++r) {
            detail::eval_gates(X.row(r), params.trees[m], ws);
            detail::eval_flow(topo, ws);
            detail::accumulate_output(params.trees[m], ws, out[m].row(r));
        }
    }
    return out;
}

int argmax(std::span<const double> v) noexcept {
    int best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = static_cast<int>(i);
    }
    return best;
}

double accuracy(const EnsembleParams& params, const Dataset& data) {
    if (data.size() == 0) throw std::invalid_argument("accuracy: empty dataset");
    const Matrix logits = ensemble_logits(params, data.features);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < data.size(); ++r) {
        if (argmax(logits.row(r)) == data.labels[r]) ++correct;
    }
    return 100.0 * double(correct) / double(data.size());
}

Dataset select_rows(const Dataset& data, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.features = Matrix(rows.size(), data.feature_count());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = data.features.row(rows[i]);
        std::copy(src.begin(), src.end(), out.features.row(i).begin());
        out.labels.push_back(data.labels[rows[i]]);
    }
    out.feature_names = data.feature_names;
    out.provenance = data.provenance;
    out.classes = data.classes;
    return out;
}

}  // namespace treelmc
