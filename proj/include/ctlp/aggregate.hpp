#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ctlp/graph.hpp"
#include "ctlp/matrix.hpp"

namespace ctlp {

/// One untrained GCN: weights[0] is d×hidden, the rest hidden×hidden.
struct GcnParams {
  std::vector<Matrix> weights;

  std::size_t layers() const noexcept { return weights.size(); }
  friend bool operator==(const GcnParams&, const GcnParams&) = default;
};

/// Fixed, randomly initialized GCNs used as structural feature extractors.
/// The same instance must be applied to the source and the target graph.
struct GnnEnsemble {
  std::vector<GcnParams> members;
  std::size_t hidden = 0;
  std::uint64_t seed = 0;

  std::size_t width() const noexcept { return hidden * members.size(); }
};

/// The three per-task embedding views compared by GraphSim.
struct ViewSet {
  std::string task;
  Matrix base;      // X
  Matrix adj_view;  // [AX || A²X || ... || AˡX]
  Matrix gnn_view;  // [g_1(A,X) || ... || g_N(A,X)]

  std::size_t rows() const noexcept { return base.rows(); }
};

// Concatenation of A^1 X .. A^l X with the raw binary adjacency of `g`.
Matrix adjacency_aggregate(const TaskGraph& g, const Matrix& x, std::size_t l,
                           bool normalize_blocks = true);

GnnEnsemble init_gnn_ensemble(std::uint64_t seed, std::span<const std::size_t> layer_spec,
                              std::size_t d_in, std::size_t hidden);

// H⁽ᵗ⁾ = ReLU(Â H⁽ᵗ⁻¹⁾ W⁽ᵗ⁾), returns H⁽ᴸ⁾.
Matrix gcn_forward(const NormalizedAdjacency& adj, const Matrix& x, const GcnParams& member);

Matrix gnn_aggregate(const NormalizedAdjacency& adj, const Matrix& x, const GnnEnsemble& ensemble,
                     bool normalize_blocks = true);

struct ViewOptions {
  std::size_t l_hops = 2;
  bool normalize_blocks = true;
  bool with_adj_view = true;
  bool with_gnn_view = true;
};

// Builds every view for one task. Disabled views are left empty.
ViewSet compute_views(std::string task, const Matrix& x, const TaskGraph& g,
                      const GnnEnsemble& ensemble, const ViewOptions& options);

}  // namespace ctlp
