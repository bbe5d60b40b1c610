#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "gridnlp/sparse/matrix.hpp"

namespace gridnlp::sparse {

// Approximate-minimum-degree fill-reducing ordering on a symmetric pattern.
//
// Quotient-graph formulation: eliminated pivots become elements whose member
// lists stand in for the fill they would create.  Degrees are the classic
// approximate external degrees (cheap upper bounds using |Le \ Lp| counts),
// with aggressive element absorption and indistinguishable-node merging.
// Deterministic for a fixed input pattern.
//
// Input: any triangle (or both) of the symmetric pattern; the diagonal is
// ignored.  Returns perm with perm[k] = original index eliminated k-th.
inline std::vector<index_t> amd_order(const CscPattern& pattern) {
  if (pattern.nrows != pattern.ncols)
    throw Error("amd_order: pattern must be square");
  const index_t n = pattern.nrows;
  std::vector<index_t> perm;
  perm.reserve(n);
  if (n == 0) return perm;

  // Symmetrized adjacency lists without the diagonal.
  std::vector<std::vector<index_t>> var_adj(n);
  for (index_t c = 0; c < n; ++c) {
    for (index_t k = pattern.colptr[c];
         k < pattern.colptr[static_cast<size_t>(c) + 1]; ++k) {
      const index_t r = pattern.rowidx[k];
      if (r == c) continue;
      var_adj[r].push_back(c);
      var_adj[c].push_back(r);
    }
  }
  for (index_t i = 0; i < n; ++i) {
    auto& a = var_adj[i];
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }

  enum class State : std::uint8_t { Variable, Element, Merged };
  std::vector<State> state(n, State::Variable);
  std::vector<index_t> weight(n, 1);             // supervariable sizes
  std::vector<std::vector<index_t>> var_elems(n);
  std::vector<std::vector<index_t>> members(n);  // element member lists
  std::vector<index_t> esize(n, 0);              // weighted live member count
  std::vector<std::vector<index_t>> absorbed(n); // merge trees for output
  std::vector<index_t> degree(n, 0);
  std::vector<index_t> outside(n, 0);            // |Le \ Lp| scratch
  std::vector<index_t> seen(n, -1);              // element stamp
  std::vector<index_t> marked(n, -1);            // variable stamp

  // Degree buckets (doubly linked, LIFO).
  std::vector<index_t> head(n, -1), dnext(n, -1), dprev(n, -1);
  auto bucket_of = [&](index_t i) {
    return std::min<index_t>(degree[i], n - 1);
  };
  auto bucket_insert = [&](index_t i) {
    const index_t b = bucket_of(i);
    dnext[i] = head[b];
    dprev[i] = -1;
    if (head[b] != -1) dprev[head[b]] = i;
    head[b] = i;
  };
  auto bucket_remove = [&](index_t i) {
    const index_t b = bucket_of(i);
    if (dprev[i] != -1)
      dnext[dprev[i]] = dnext[i];
    else
      head[b] = dnext[i];
    if (dnext[i] != -1) dprev[dnext[i]] = dprev[i];
  };

  for (index_t i = 0; i < n; ++i) {
    degree[i] = static_cast<index_t>(var_adj[i].size());
    bucket_insert(i);
  }

  index_t alive_weight = n;
  index_t stamp = 0;
  index_t mindeg = 0;
  index_t emitted = 0;
  std::vector<index_t> lp;  // members of the current pivot's element

  // Emit a supervariable and everything merged into it (depth-first).
  auto emit = [&](index_t root) {
    std::vector<index_t> stack{root};
    while (!stack.empty()) {
      const index_t v = stack.back();
      stack.pop_back();
      perm.push_back(v);
      ++emitted;
      for (auto it = absorbed[v].rbegin(); it != absorbed[v].rend(); ++it)
        stack.push_back(*it);
    }
  };

  while (emitted < n) {
    // Pick the pivot from the lowest nonempty bucket.
    while (mindeg < n && head[mindeg] == -1) ++mindeg;
    const index_t p = head[mindeg];
    bucket_remove(p);

    // Gather Lp = (adj vars of p) U (members of p's elements), minus p.
    ++stamp;
    marked[p] = stamp;
    lp.clear();
    for (index_t j : var_adj[p]) {
      if (state[j] != State::Variable || marked[j] == stamp) continue;
      marked[j] = stamp;
      lp.push_back(j);
    }
    for (index_t e : var_elems[p]) {
      if (state[e] != State::Element) continue;
      for (index_t j : members[e]) {
        if (state[j] != State::Variable || marked[j] == stamp) continue;
        marked[j] = stamp;
        lp.push_back(j);
      }
      state[e] = State::Merged;  // absorbed into the new element
    }

    state[p] = State::Element;
    members[p] = lp;
    index_t lp_weight = 0;
    for (index_t j : lp) lp_weight += weight[j];
    esize[p] = lp_weight;
    alive_weight -= weight[p];
    emit(p);

    // One pass to get |Le \ Lp| for every element touching Lp.
    for (index_t i : lp) {
      for (index_t e : var_elems[i]) {
        if (state[e] != State::Element || e == p) continue;
        if (seen[e] != stamp) {
          seen[e] = stamp;
          outside[e] = esize[e];
        }
        outside[e] -= weight[i];
      }
    }

    // Clean lists and refresh degrees for the pivot's neighborhood.
    for (index_t i : lp) {
      bucket_remove(i);
      auto& a = var_adj[i];
      size_t w = 0;
      index_t adj_weight = 0;
      for (index_t j : a) {
        if (state[j] != State::Variable || marked[j] == stamp || j == p)
          continue;  // Lp-internal edges are implied by element p
        a[w++] = j;
        adj_weight += weight[j];
      }
      a.resize(w);

      auto& el = var_elems[i];
      w = 0;
      index_t elem_outside = 0;
      for (index_t e : el) {
        if (state[e] != State::Element || e == p) continue;
        if (outside[e] == 0) {
          state[e] = State::Merged;  // aggressive absorption
          continue;
        }
        el[w++] = e;
        elem_outside += outside[e];
      }
      el.resize(w);
      el.push_back(p);

      const index_t lp_minus_i = lp_weight - weight[i];
      index_t d = adj_weight + lp_minus_i + elem_outside;
      d = std::min(d, static_cast<index_t>(alive_weight - weight[i]));
      d = std::min(d, degree[i] + lp_minus_i);
      degree[i] = d;
    }

    // Merge indistinguishable supervariables inside Lp (identical quotient
    // adjacency after cleanup).  Hash then confirm exactly.
    if (lp.size() > 1) {
      std::vector<std::pair<std::uint64_t, index_t>> hashes;
      hashes.reserve(lp.size());
      for (index_t i : lp) {
        std::uint64_t h = 0x9e3779b97f4a7c15ull;
        for (index_t j : var_adj[i]) h = h * 1099511628211ull + (j + 1);
        for (index_t e : var_elems[i]) h = h * 1099511628211ull + (e + 1) * 31;
        hashes.emplace_back(h, i);
      }
      std::stable_sort(hashes.begin(), hashes.end(),
                       [](const auto& x, const auto& y) {
                         return x.first < y.first;
                       });
      for (size_t s = 0; s < hashes.size(); ++s) {
        const index_t i = hashes[s].second;
        if (state[i] != State::Variable) continue;
        for (size_t t = s + 1;
             t < hashes.size() && hashes[t].first == hashes[s].first; ++t) {
          const index_t j = hashes[t].second;
          if (state[j] != State::Variable) continue;
          if (var_adj[i] == var_adj[j] && var_elems[i] == var_elems[j]) {
            state[j] = State::Merged;
            absorbed[i].push_back(j);
            degree[i] -= weight[j];  // j's weight is internal now
            weight[i] += weight[j];
            var_adj[j].clear();
            var_elems[j].clear();
          }
        }
      }
    }

    for (index_t i : lp) {
      if (state[i] != State::Variable) continue;
      bucket_insert(i);
      mindeg = std::min(mindeg, bucket_of(i));
    }
  }
  return perm;
}

}  // namespace gridnlp::sparse
