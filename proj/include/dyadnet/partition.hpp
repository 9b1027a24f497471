// Diagonal-slice leave-out partition. Set k of the base partition holds the
// edges (i,j) with (j - i) mod N = k, so each set takes exactly one outgoing
// and one incoming edge from every node. The leave-l-out coarsening merges l
// base sets, which requires l to divide N-1.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dyadnet/common.hpp"

namespace dyadnet {

struct LeaveOutPartition {
  int n_nodes = 0;
  int l = 1;
  int n_sets = 0;  // (N-1)/l

  // Base diagonal of edge (i,j), in 1..N-1 (0-based node indices).
  int diagonal(int i, int j) const {
    int d = (j - i) % n_nodes;
    if (d < 0) d += n_nodes;
    return d;
  }

  // Leave-out set of edge (i,j), in 1..n_sets: base sets k, k+N_l, k+2N_l, ...
  // fold onto k.
  int set_of(int i, int j) const { return (diagonal(i, j) - 1) % n_sets + 1; }

  // Edges of set k as (i,j) pairs, 0-based.
  std::vector<std::pair<int, int>> set_edges(int k) const {
    check_set_index(k);
    std::vector<std::pair<int, int>> edges;
    edges.reserve(static_cast<std::size_t>(n_nodes) * l);
    for (int m = 0; m < l; ++m) {
      const int d = k + m * n_sets;
      for (int i = 0; i < n_nodes; ++i) edges.emplace_back(i, (i + d) % n_nodes);
    }
    return edges;
  }

  // Inclusion mask for the k-th leave-out sample: 0 on removed edges and on
  // the diagonal, 1 elsewhere.
  std::vector<std::uint8_t> edge_mask(int k) const {
    check_set_index(k);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(n_nodes) * n_nodes, 1);
    for (int i = 0; i < n_nodes; ++i) mask[static_cast<std::size_t>(i) * n_nodes + i] = 0;
    for (const auto& [i, j] : set_edges(k)) mask[static_cast<std::size_t>(i) * n_nodes + j] = 0;
    return mask;
  }

  void check_set_index(int k) const {
    if (k < 1 || k > n_sets)
      throw ValidationError("leave-out set index " + std::to_string(k) + " out of range 1.." +
                            std::to_string(n_sets));
  }
};

inline LeaveOutPartition build_partition(int n_nodes, int l = 1) {
  if (n_nodes < 4) throw ValidationError("partition needs N >= 4");
  if (l < 1 || (n_nodes - 1) % l != 0)
    throw ValidationError("InvalidBlockSize: l=" + std::to_string(l) + " does not divide N-1=" +
                          std::to_string(n_nodes - 1));
  LeaveOutPartition p;
  p.n_nodes = n_nodes;
  p.l = l;
  p.n_sets = (n_nodes - 1) / l;
  return p;
}

struct PartitionValidation {
  bool valid = true;
  std::string first_violation;
};

// Exhaustively checks the two partition conditions on explicit sets: every
// edge in exactly one set, and every set removing exactly l outgoing and l
// incoming edges per node. Reports the first violation with indices.
inline PartitionValidation validate_sets(int n, int l,
                                         const std::vector<std::vector<std::pair<int, int>>>& sets) {
  PartitionValidation v;
  std::vector<int> hits(static_cast<std::size_t>(n) * n, 0);
  for (std::size_t k = 0; k < sets.size(); ++k) {
    std::vector<int> row_removed(n, 0), col_removed(n, 0);
    for (const auto& [i, j] : sets[k]) {
      if (i == j) {
        v.valid = false;
        v.first_violation = "self pair in set " + std::to_string(k + 1);
        return v;
      }
      ++hits[static_cast<std::size_t>(i) * n + j];
      ++row_removed[i];
      ++col_removed[j];
    }
    for (int i = 0; i < n; ++i) {
      if (row_removed[i] != l || col_removed[i] != l) {
        v.valid = false;
        v.first_violation = "set " + std::to_string(k + 1) + " removes " +
                            std::to_string(row_removed[i]) + " outgoing / " +
                            std::to_string(col_removed[i]) + " incoming edges at node " +
                            std::to_string(i + 1) + ", expected " + std::to_string(l);
        return v;
      }
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (hits[static_cast<std::size_t>(i) * n + j] != 1) {
        v.valid = false;
        v.first_violation = "edge (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                            ") appears in " + std::to_string(hits[static_cast<std::size_t>(i) * n + j]) +
                            " sets";
        return v;
      }
    }
  return v;
}

inline PartitionValidation validate(const LeaveOutPartition& p) {
  std::vector<std::vector<std::pair<int, int>>> sets;
  sets.reserve(p.n_sets);
  for (int k = 1; k <= p.n_sets; ++k) sets.push_back(p.set_edges(k));
  return validate_sets(p.n_nodes, p.l, sets);
}

// JSON audit dump: {"n":N,"l":L,"sets":[[[i,j],...],...]} with 1-based nodes.
inline std::string partition_to_json(const LeaveOutPartition& p) {
  std::string out = "{\"n\":" + std::to_string(p.n_nodes) + ",\"l\":" + std::to_string(p.l) +
                    ",\"sets\":[";
  for (int k = 1; k <= p.n_sets; ++k) {
    if (k > 1) out += ',';
    out += '[';
    bool first = true;
    for (const auto& [i, j] : p.set_edges(k)) {
      if (!first) out += ',';
      first = false;
      out += '[' + std::to_string(i + 1) + ',' + std::to_string(j + 1) + ']';
    }
    out += ']';
  }
  out += "]}";
  return out;
}

}  // namespace dyadnet
