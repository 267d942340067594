#include "treelmc/matching.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "treelmc/kernels.hpp"
#include "treelmc/lap.hpp"

namespace treelmc {

namespace {

void require_same_spec(const EnsembleParams& A, const EnsembleParams& B) {
    if (!(A.spec == B.spec)) {
        throw std::invalid_argument("models do not share an architecture: " + describe(A.spec) + " vs " +
                                    describe(B.spec));
    }
}

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// q[j] = argmax_u adjust(wA[p[j]], u) . wB[j]; the first maximum wins.
std::vector<int> best_ops(const EnsembleParams& wA, const EnsembleParams& wB, const std::vector<int>& p,
                          const std::vector<InvarianceOp>& ops) {
    std::vector<int> q(p.size(), 0);
    for (std::size_t j = 0; j < p.size(); ++j) {
        double best = 0.0;
        for (std::size_t u = 0; u < ops.size(); ++u) {
            const double s = tree_inner_product(adjust_tree(wA.trees[p[j]], ops[u], wA.spec), wB.trees[j]);
            if (u == 0 || s > best) {
                best = s;
                q[j] = static_cast<int>(u);
            }
        }
    }
    return q;
}

}  // namespace

std::string_view method_name(MatchMethod m) { return m == MatchMethod::Weight ? "wm" : "am"; }

MatchMethod parse_method(std::string_view name) {
    if (name == "wm") return MatchMethod::Weight;
    if (name == "am") return MatchMethod::Activation;
    throw std::invalid_argument("unknown matching method '" + std::string(name) + "'");
}

std::string_view level_name(InvarianceLevel level) {
    switch (level) {
    case InvarianceLevel::Naive: return "naive";
    case InvarianceLevel::Perm: return "perm";
    case InvarianceLevel::Full: return "full";
    }
    return "unknown";
}

InvarianceLevel parse_level(std::string_view name) {
    for (auto l : {InvarianceLevel::Naive, InvarianceLevel::Perm, InvarianceLevel::Full}) {
        if (name == level_name(l)) return l;
    }
    throw std::invalid_argument("unknown invariance level '" + std::string(name) + "'");
}

Alignment Alignment::identity(int trees) {
    Alignment a;
    a.p.resize(trees);
    a.q.assign(trees, 0);
    for (int j = 0; j < trees; ++j) a.p[j] = j;
    return a;
}

void Alignment::validate(int trees, std::size_t op_count) const {
    if (p.size() != static_cast<std::size_t>(trees) || q.size() != static_cast<std::size_t>(trees)) {
        throw std::invalid_argument("alignment length does not match the tree count");
    }
    std::vector<char> seen(trees, 0);
    for (int v : p) {
        if (v < 0 || v >= trees || seen[v]) throw std::invalid_argument("alignment p is not a permutation");
        seen[v] = 1;
    }
    for (int v : q) {
        if (v < 0 || static_cast<std::size_t>(v) >= op_count) throw std::invalid_argument("alignment q index out of range");
    }
}

MatchResult weight_matching(const EnsembleParams& A, const EnsembleParams& B, bool use_invariances, double budget) {
    require_same_spec(A, B);
    const std::vector<InvarianceOp> ops =
        use_invariances ? enumerate_ops(A.spec, budget) : std::vector<InvarianceOp>{identity_op(A.spec)};
    const EnsembleParams wA = weighting(A);
    const EnsembleParams wB = weighting(B);
    const int M = A.spec.trees;

    // S[u](a, b) for every op, then the element-wise maximum over ops.
    std::vector<Matrix> S(ops.size(), Matrix(M, M));
    Matrix best(M, M);
    for (std::size_t u = 0; u < ops.size(); ++u) {
        for (int a = 0; a < M; ++a) {
            const TreeParams theta = adjust_tree(wA.trees[a], ops[u], A.spec);
            for (int b = 0; b < M; ++b) {
                const double s = tree_inner_product(theta, wB.trees[b]);
                S[u](a, b) = s;
                if (u == 0 || s > best(a, b)) best(a, b) = s;
            }
        }
    }

    MatchResult out;
    out.alignment.p = linear_sum_assignment(best, /*maximize=*/true);
    out.alignment.q.assign(M, 0);
    for (int j = 0; j < M; ++j) {
        const int a = out.alignment.p[j];
        for (std::size_t u = 1; u < ops.size(); ++u) {
            if (S[u](a, j) > S[out.alignment.q[j]](a, j)) out.alignment.q[j] = static_cast<int>(u);
        }
    }
    out.objective = assignment_objective(best, out.alignment.p);
    return out;
}

MatchResult activation_matching(const EnsembleParams& A, const EnsembleParams& B, const Matrix& samples,
                                bool use_invariances, double budget) {
    require_same_spec(A, B);
    if (samples.rows() == 0) throw std::invalid_argument("activation_matching: need at least one sample");
    if (samples.cols() != static_cast<std::size_t>(A.spec.features)) {
        throw std::invalid_argument("activation_matching: sample feature count does not match the models");
    }
    const int M = A.spec.trees;
    const auto outA = per_tree_logits(A, samples);
    const auto outB = per_tree_logits(B, samples);
    Matrix S(M, M);
    for (int a = 0; a < M; ++a) {
        for (int b = 0; b < M; ++b) S(a, b) = kernels::dot(outA[a].data(), outB[b].data());
    }

    MatchResult out;
    out.alignment.p = linear_sum_assignment(S, /*maximize=*/true);
    out.objective = assignment_objective(S, out.alignment.p);
    if (use_invariances) {
        const auto ops = enumerate_ops(A.spec, budget);
        out.alignment.q = best_ops(weighting(A), weighting(B), out.alignment.p, ops);
    } else {
        out.alignment.q.assign(M, 0);
    }
    return out;
}

EnsembleParams apply_alignment(const EnsembleParams& A, const Alignment& alignment) {
    const int M = A.spec.trees;
    const bool all_identity = std::all_of(alignment.q.begin(), alignment.q.end(), [](int v) { return v == 0; });
    const std::vector<InvarianceOp> ops =
        all_identity ? std::vector<InvarianceOp>{identity_op(A.spec)} : enumerate_ops(A.spec);
    alignment.validate(M, ops.size());
    EnsembleParams out{A.spec, {}};
    out.trees.reserve(M);
    for (int j = 0; j < M; ++j) out.trees.push_back(adjust_tree(A.trees[alignment.p[j]], ops[alignment.q[j]], A.spec));
    return out;
}

nlohmann::json alignment_to_json(const Alignment& a, MatchMethod method, InvarianceLevel level,
                                 const ArchitectureSpec& spec) {
    return nlohmann::json{{"p", a.p},
                          {"q", a.q},
                          {"method", std::string(method_name(method))},
                          {"invariances", std::string(level_name(level))},
                          {"spec_hash", hex64(spec_hash(spec))}};
}

Alignment alignment_from_json(const nlohmann::json& j, const ArchitectureSpec& spec) {
    if (j.contains("spec_hash") && j.at("spec_hash").get<std::string>() != hex64(spec_hash(spec))) {
        throw std::invalid_argument("alignment was computed for a different architecture");
    }
    Alignment a;
    a.p = j.at("p").get<std::vector<int>>();
    a.q = j.at("q").get<std::vector<int>>();
    const double u = op_count(spec);
    a.validate(spec.trees, u > 1e18 ? std::numeric_limits<std::size_t>::max() : static_cast<std::size_t>(u));
    return a;
}

}  // namespace treelmc
