#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ctlp/matrix.hpp"

namespace ctlp {

// ⟨u,v⟩ / (‖u‖‖v‖). Throws on dimension mismatch or a zero-norm input.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// Binary kNN graph over the rows of an embedding matrix.
struct TaskGraph {
  std::size_t k = 0;
  // Raw top-k picks per node, best first. Never contains self-loops.
  std::vector<std::vector<std::uint32_t>> directed;
  // Adjacency consumed downstream, ascending per row: directed ∨ directedᵀ when
  // symmetrized, otherwise the raw picks.
  std::vector<std::vector<std::uint32_t>> neighbors;
  bool symmetrized = false;

  std::size_t n_nodes() const noexcept { return neighbors.size(); }
  bool has_edge(std::size_t i, std::size_t j) const;
};

struct KnnOptions {
  bool symmetrize = true;
  // Optional group id per node; candidates sharing the node's group are skipped.
  std::span<const std::size_t> groups = {};
  unsigned threads = 0;
};

// Top-k cosine neighbours per row, ties broken by lowest index.
TaskGraph build_knn_graph(const Matrix& x, std::size_t k, const KnnOptions& options = {});

// OR-symmetrizes raw neighbour lists into sorted adjacency rows.
std::vector<std::vector<std::uint32_t>> symmetrize(
    const std::vector<std::vector<std::uint32_t>>& directed);

/// Sparse D^{-1/2}(A + I)D^{-1/2} in CSR layout.
struct NormalizedAdjacency {
  std::vector<std::size_t> row_ptr;
  std::vector<std::uint32_t> cols;
  std::vector<double> values;

  std::size_t n_nodes() const noexcept { return row_ptr.empty() ? 0 : row_ptr.size() - 1; }
  Matrix multiply(const Matrix& x) const;
  Matrix to_dense() const;
};

NormalizedAdjacency normalize_adjacency(const TaskGraph& g);

// A·Y for the binary adjacency of `g`.
Matrix adjacency_multiply(const TaskGraph& g, const Matrix& y);

// One JSON object per line: {"node": i, "neighbors": [...]}.
std::string graph_to_jsonl(const TaskGraph& g);

}  // namespace ctlp
