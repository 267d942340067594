#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "treelmc/invariance.hpp"
#include "treelmc/matrix.hpp"
#include "treelmc/model.hpp"

namespace treelmc {

enum class MatchMethod { Weight, Activation };
enum class InvarianceLevel { Naive, Perm, Full };

std::string_view method_name(MatchMethod m);          // "wm" | "am"
MatchMethod parse_method(std::string_view name);
std::string_view level_name(InvarianceLevel level);   // "naive" | "perm" | "full"
InvarianceLevel parse_level(std::string_view name);

// Tree j of the aligned model is adjust_tree(A[p[j]], ops[q[j]]), where ops is
// enumerate_ops(spec). Indices are zero-based; q[j] == 0 is the identity.
struct Alignment {
    std::vector<int> p;
    std::vector<int> q;

    static Alignment identity(int trees);
    /// Throws std::invalid_argument unless p is a bijection and q < op_count.
    void validate(int trees, std::size_t op_count) const;

    friend bool operator==(const Alignment&, const Alignment&) = default;
};

struct MatchResult {
    Alignment alignment;
    double objective = 0.0;  // sum over matched pairs of the selected similarity
};

/// Weighted-parameter matching. With `use_invariances` false only the
/// identity op is considered (tree permutation alone).
MatchResult weight_matching(const EnsembleParams& A, const EnsembleParams& B, bool use_invariances = true,
                            double budget = kDefaultOpBudget);

/// Output-based matching: trees are paired by the inner product of their
/// outputs on `samples` (rows = samples, cols = features); ops are then chosen
/// per matched pair on weighted parameters.
MatchResult activation_matching(const EnsembleParams& A, const EnsembleParams& B, const Matrix& samples,
                                bool use_invariances = true, double budget = kDefaultOpBudget);

EnsembleParams apply_alignment(const EnsembleParams& A, const Alignment& alignment);

nlohmann::json alignment_to_json(const Alignment& a, MatchMethod method, InvarianceLevel level,
                                 const ArchitectureSpec& spec);
Alignment alignment_from_json(const nlohmann::json& j, const ArchitectureSpec& spec);

}  // namespace treelmc
