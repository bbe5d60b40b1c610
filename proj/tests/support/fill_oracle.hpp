#pragma once

#include <set>
#include <utility>
#include <vector>

// Test-side oracle: count the strict-lower nonzeros of the Cholesky-shaped
// factor produced by eliminating a symmetric pattern in a given order.
// Straightforward set-based elimination simulation, independent of the
// elimination-tree machinery it is used to check.
inline long fill_after_elimination(int n,
                                   const std::vector<std::pair<int, int>>& edges,
                                   const std::vector<int>& perm) {
  std::vector<int> pos(n);
  for (int k = 0; k < n; ++k) pos[perm[k]] = k;
  // higher[k] = neighbors of the k-th eliminated node that are eliminated later
  std::vector<std::set<int>> higher(n);
  for (auto [r, c] : edges) {
    if (r == c) continue;
    int i = pos[r], j = pos[c];
    if (i > j) std::swap(i, j);
    higher[i].insert(j);
  }
  long fill = 0;
  for (int k = 0; k < n; ++k) {
    fill += static_cast<long>(higher[k].size());
    if (higher[k].empty()) continue;
    const int m = *higher[k].begin();  // parent: earliest later neighbor
    for (int j : higher[k])
      if (j != m) higher[m].insert(j);
  }
  return fill;
}
