#pragma once

#include <limits>
#include <span>
#include <vector>

#include "ppmreg/errors.hpp"

namespace ppmreg {

// Exact minimum-cost perfect matching on a dense n x n cost matrix via
// shortest augmenting paths with dual potentials (Jonker-Volgenant style,
// O(n^3)). Returns the optimal total cost; row_to_col receives the
// matching.
inline double solve_assignment(std::span<const double> cost, std::size_t n,
                               std::vector<std::size_t>& row_to_col) {
    if (cost.size() != n * n) throw ContractViolation("solve_assignment: bad matrix size");
    row_to_col.assign(n, 0);
    if (n == 0) return 0.0;

    constexpr double kInf = std::numeric_limits<double>::infinity();
    // 1-based arrays; col_to_row[0] is the working slot for the row being
    // inserted, following the classic formulation.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> col_to_row(n + 1, 0);
    std::vector<std::size_t> prev_col(n + 1, 0);
    std::vector<double> min_slack(n + 1);
    std::vector<char> used(n + 1);

    for (std::size_t row = 1; row <= n; ++row) {
        col_to_row[0] = row;
        std::size_t j0 = 0;
        std::fill(min_slack.begin(), min_slack.end(), kInf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = col_to_row[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            const double* cost_row = cost.data() + (i0 - 1) * n;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost_row[j - 1] - u[i0] - v[j];
                if (cur < min_slack[j]) {
                    min_slack[j] = cur;
                    prev_col[j] = j0;
                }
                if (min_slack[j] < delta) {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[col_to_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
        } while (col_to_row[j0] != 0);
        // Augment along the alternating path.
        do {
            const std::size_t j1 = prev_col[j0];
            col_to_row[j0] = col_to_row[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    double total = 0.0;
    for (std::size_t j = 1; j <= n; ++j) {
        row_to_col[col_to_row[j] - 1] = j - 1;
        total += cost[(col_to_row[j] - 1) * n + (j - 1)];
    }
    return total;
}

} // namespace ppmreg
