#pragma once

#include <span>
#include <vector>

#include "treelmc/matrix.hpp"

namespace treelmc {

/// Exact linear sum assignment on a square matrix. Returns p with p[j] = row
/// assigned to column j, optimizing sum_j S(p[j], j). Among optimal
/// assignments the lexicographically smallest p is returned. Throws
/// std::invalid_argument for non-square or non-finite input.
std::vector<int> linear_sum_assignment(const Matrix& S, bool maximize);

/// sum_j S(p[j], j), accumulated in column order.
double assignment_objective(const Matrix& S, std::span<const int> p);

}  // namespace treelmc
