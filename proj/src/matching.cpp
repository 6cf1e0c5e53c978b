#include "cdp/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cdp {

namespace {

struct Potentials {
  std::vector<double> u;  // per row, 1-based
  std::vector<double> v;  // per column, 1-based
  std::vector<int> p;     // row matched to column j, 1-based, 0 = none
};

// Minimum-cost assignment of every row, rows <= cols. Unused columns keep a
// zero potential, so (u, v) stays dual feasible for the rectangular problem.
Potentials hungarian(const WeightMatrix& cost) {
  const int n = cost.rows;
  const int m = cost.cols;
  constexpr double inf = std::numeric_limits<double>::infinity();
  Potentials pot{std::vector<double>(n + 1, 0.0), std::vector<double>(m + 1, 0.0),
                 std::vector<int>(m + 1, 0)};
  std::vector<int> way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    pot.p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = pot.p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost.at(i0 - 1, j - 1) - pot.u[i0] - pot.v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          pot.u[pot.p[j]] += delta;
          pot.v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (pot.p[j0] != 0);
    do {
      const int j1 = way[j0];
      pot.p[j0] = pot.p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  return pot;
}

}  // namespace

Assignment max_weight_matching(const WeightMatrix& weights) {
  Assignment out;
  out.col_of_row.assign(weights.rows, -1);
  if (weights.rows == 0 || weights.cols == 0) return out;
  for (double w : weights.data) {
    if (!std::isfinite(w)) throw std::invalid_argument("matching weights must be finite");
  }

  const int n = weights.rows;
  const int real_cols = weights.cols;
  const int m = std::max(n, real_cols);  // padded columns weigh zero
  WeightMatrix cost(n, m, 0.0);
  double scale = 1.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < real_cols; ++j) {
      cost.at(i, j) = -weights.at(i, j);
      scale = std::max(scale, std::abs(weights.at(i, j)));
    }
  }
  const Potentials pot = hungarian(cost);
  const double tol = 1e-9 * scale;

  // Square view: rows n..m-1 are interchangeable zero-weight dummies that
  // may hold any column whose potential is zero. Every perfect matching of
  // the tight graph is optimal, so the lexicographic minimum is found by
  // fixing rows in order and rotating alternating cycles.
  const int total_rows = m;
  std::vector<int> owner(m, -1);
  std::vector<int> col_of(total_rows, -1);
  for (int j = 1; j <= m; ++j) {
    if (pot.p[j] != 0) {
      owner[j - 1] = pot.p[j] - 1;
      col_of[pot.p[j] - 1] = j - 1;
    }
  }
  int next_dummy = n;
  for (int j = 0; j < m; ++j) {
    if (owner[j] < 0) {
      owner[j] = next_dummy;
      col_of[next_dummy++] = j;
    }
  }
  auto allowed = [&](int row, int col) {
    if (row >= n) return std::abs(pot.v[col + 1]) <= tol;
    return std::abs(cost.at(row, col) - pot.u[row + 1] - pot.v[col + 1]) <= tol;
  };

  std::vector<char> fixed(total_rows, 0);
  std::vector<int> came_from(m);
  std::vector<int> queue;
  for (int i = 0; i < n; ++i) {
    const int current = col_of[i];
    for (int j = 0; j < current; ++j) {
      if (!allowed(i, j)) continue;
      const int start_row = owner[j];
      if (fixed[start_row]) continue;
      // Search columns reachable by shifting rows; column `current` is
      // released by row i.
      std::fill(came_from.begin(), came_from.end(), -2);
      queue.assign(1, start_row);
      int found = -1;
      for (std::size_t head = 0; head < queue.size() && found < 0; ++head) {
        const int row = queue[head];
        for (int c = 0; c < m; ++c) {
          if (c == j || came_from[c] != -2 || !allowed(row, c)) continue;
          came_from[c] = row;
          if (c == current) {
            found = c;
            break;
          }
          const int next = owner[c];
          if (next != i && !fixed[next]) queue.push_back(next);
        }
      }
      if (found < 0) continue;
      for (int c = found; c != j;) {
        const int row = came_from[c];
        const int prev_col = col_of[row];
        owner[c] = row;
        col_of[row] = c;
        c = prev_col;
      }
      owner[j] = i;
      col_of[i] = j;
      break;
    }
    fixed[i] = 1;
  }

  for (int i = 0; i < n; ++i) {
    const int c = col_of[i];
    if (c < real_cols) {
      out.col_of_row[i] = c;
      out.value += weights.at(i, c);
    }
  }
  return out;
}

}  // namespace cdp
