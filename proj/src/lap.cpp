#include "treelmc/lap.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace treelmc {

namespace {

struct Solution {
    std::vector<int> row_of_col;
    std::vector<double> u;  // row potentials
    std::vector<double> v;  // column potentials
};

// Shortest augmenting path (Kuhn-Munkres with potentials), O(n^3).
// Minimizes; reduced costs cost(i,j) - u[i] - v[j] stay nonnegative and are
// zero on the returned matching.
Solution solve_min(const Matrix& cost) {
    const int n = static_cast<int>(cost.rows());
    constexpr double inf = std::numeric_limits<double>::infinity();
    // 1-based bookkeeping with a virtual column 0.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> match(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = match[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    Solution s;
    s.row_of_col.resize(n);
    s.u.assign(u.begin() + 1, u.end());
    s.v.assign(v.begin() + 1, v.end());
    for (int j = 1; j <= n; ++j) s.row_of_col[j - 1] = match[j] - 1;
    return s;
}

// Every optimal assignment uses only edges that are tight under an optimal
// dual, so the lexicographically smallest optimum is the lexicographically
// smallest perfect matching in the tight-edge graph. Columns are fixed in
// order, each to the smallest row that still admits a completion.
std::vector<int> lexicographic_refine(const Matrix& cost, const Solution& sol, double tol) {
    const int n = static_cast<int>(cost.rows());
    auto tight = [&](int i, int j) { return cost(i, j) - sol.u[i] - sol.v[j] <= tol; };

    std::vector<int> row_of_col = sol.row_of_col;
    std::vector<int> col_of_row(n);
    for (int j = 0; j < n; ++j) col_of_row[row_of_col[j]] = j;
    std::vector<char> fixed_row(n, 0);
    std::vector<int> parent_col(n), seen_row(n, -1), queue;
    queue.reserve(n);

    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            if (fixed_row[i] || !tight(i, j)) continue;
            if (row_of_col[j] == i) break;
            // Move j onto row i; the old row of j and the old column of i
            // become free and must be rematched through unfixed columns.
            const int free_row = row_of_col[j];
            const int free_col = col_of_row[i];
            queue.clear();
            queue.push_back(free_col);
            bool found = false;
            int end_row = -1;
            for (std::size_t head = 0; head < queue.size() && !found; ++head) {
                const int c = queue[head];
                for (int r = 0; r < n; ++r) {
                    if (r == i || fixed_row[r] || seen_row[r] == j * n + i || !tight(r, c)) continue;
                    seen_row[r] = j * n + i;
                    parent_col[r] = c;
                    if (r == free_row) {
                        found = true;
                        end_row = r;
                        break;
                    }
                    queue.push_back(col_of_row[r]);
                }
            }
            if (!found) continue;
            // Augment backwards along the alternating path.
            int r = end_row;
            while (true) {
                const int c = parent_col[r];
                const int next_r = row_of_col[c];
                row_of_col[c] = r;
                col_of_row[r] = c;
                if (c == free_col) break;
                r = next_r;
            }
            row_of_col[j] = i;
            col_of_row[i] = j;
            break;
        }
        fixed_row[row_of_col[j]] = 1;
    }
    return row_of_col;
}

}  // namespace

std::vector<int> linear_sum_assignment(const Matrix& S, bool maximize) {
    if (S.rows() != S.cols()) throw std::invalid_argument("linear_sum_assignment: matrix must be square");
    const int n = static_cast<int>(S.rows());
    if (n == 0) return {};
    double scale = 1.0;
    Matrix cost(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double s = S(i, j);
            if (!std::isfinite(s)) throw std::invalid_argument("linear_sum_assignment: non-finite entry");
            cost(i, j) = maximize ? -s : s;
            scale = std::max(scale, std::abs(s));
        }
    }
    const Solution sol = solve_min(cost);
    const double tol = 1e-11 * scale * std::max(1, n);
    return lexicographic_refine(cost, sol, tol);
}

double assignment_objective(const Matrix& S, std::span<const int> p) {
    double total = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) total += S(p[j], j);
    return total;
}

}  // namespace treelmc
