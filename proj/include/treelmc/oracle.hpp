#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "treelmc/invariance.hpp"
#include "treelmc/matrix.hpp"
#include "treelmc/model.hpp"

// Slow, independent reference computations used by the test suites and by
// `treelmc verify`. Nothing here calls the forward pass, the vector kernels
// or the assignment solver it is meant to check.

namespace treelmc::oracle {

struct OracleReport {
    std::string name;
    std::size_t cases = 0;
    double max_deviation = 0.0;
    double tolerance = 0.0;
    std::optional<std::string> first_failure;

    bool passed() const { return !first_failure.has_value(); }
};

/// Exhaustive search over all M! assignments (M <= 8); returns the
/// lexicographically smallest optimum.
std::vector<int> brute_force_lap(const Matrix& S, bool maximize);

/// Oblivious tree materialized as a non-oblivious one: the depth-d slot is
/// copied into all 2^d positions of that depth. Leaves keep their indices.
ArchitectureSpec expanded_spec(const ArchitectureSpec& oblivious);
TreeParams expand_oblivious(const TreeParams& tree, const ArchitectureSpec& spec);

/// Tree output by explicit recursive descent.
std::vector<double> reference_tree_forward(std::span<const double> x, const TreeParams& tree,
                                           const ArchitectureSpec& spec);

using AdjustFn = std::function<TreeParams(const TreeParams&, const InvarianceOp&, const ArchitectureSpec&)>;

/// For `trials` random trees and every enumerated op, the largest output
/// deviation over `inputs` random x between the adjusted and original tree.
OracleReport equivalence_sweep(const ArchitectureSpec& spec, int trials, std::uint64_t seed,
                               const AdjustFn& adjust = adjust_tree, double tolerance = 1e-12, int inputs = 20);

/// Oblivious forward vs the expanded non-oblivious reference.
OracleReport expansion_check(const ArchitectureSpec& spec, int cases, std::uint64_t seed, double tolerance = 1e-12);

/// Analytic gradients vs the fourth-order central difference
/// (8[f(h) - f(-h)] - [f(2h) - f(-2h)]) / 12h on a random model and batch. Deviation is |g - fd| / max(|g|, |fd|), and 0 when both are equal.
OracleReport gradient_check(const ArchitectureSpec& spec, std::uint64_t seed, double h = 1e-3,
                            double tolerance = 1e-6, std::size_t batch = 16);

/// Fast assignment solver vs brute force on random matrices of size 2..max_size.
OracleReport lap_cross_check(int trials, int max_size, std::uint64_t seed);

/// Everything `treelmc verify` runs: all four architectures at depths 1-3.
std::vector<OracleReport> default_suite(std::uint64_t seed);

}  // namespace treelmc::oracle
