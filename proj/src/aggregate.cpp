#include "ctlp/aggregate.hpp"

#include <algorithm>
#include <cmath>

#include "ctlp/error.hpp"
#include "ctlp/rng.hpp"

namespace ctlp {

Matrix adjacency_aggregate(const TaskGraph& g, const Matrix& x, std::size_t l,
                           bool normalize_blocks) {
  if (l == 0) throw ValidationError("adjacency_aggregate: l must be >= 1");
  if (x.rows() != g.n_nodes()) throw ValidationError("adjacency_aggregate: row mismatch");
  const std::size_t d = x.cols();
  Matrix out(x.rows(), d * l);
  Matrix y = x;
  for (std::size_t t = 0; t < l; ++t) {
    y = adjacency_multiply(g, y);
    set_column_block(out, y, t * d);
  }
  if (normalize_blocks && d > 0) normalize_row_blocks(out, d);
  return out;
}

GnnEnsemble init_gnn_ensemble(std::uint64_t seed, std::span<const std::size_t> layer_spec,
                              std::size_t d_in, std::size_t hidden) {
  if (layer_spec.empty()) throw ConfigError("gnn layer spec must be non-empty");
  GnnEnsemble ens;
  ens.hidden = hidden;
  ens.seed = seed;
  for (std::size_t m = 0; m < layer_spec.size(); ++m) {
    GcnParams member;
    for (std::size_t layer = 0; layer < layer_spec[m]; ++layer) {
      const std::size_t fan_in = layer == 0 ? d_in : hidden;
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + hidden));
      CounterRng rng(derive_key(seed, m, layer));
      Matrix w(fan_in, hidden);
      for (auto& v : w.values()) v = rng.uniform(-limit, limit);
      member.weights.push_back(std::move(w));
    }
    ens.members.push_back(std::move(member));
  }
  return ens;
}

Matrix gcn_forward(const NormalizedAdjacency& adj, const Matrix& x, const GcnParams& member) {
  Matrix h = x;
  for (const auto& w : member.weights) {
    if (h.cols() != w.rows()) throw ValidationError("gcn_forward: weight shape mismatch");
    // Â(HW) equals (ÂH)W; multiplying by W first keeps the sparse product narrow.
    h = adj.multiply(matmul(h, w));
    for (auto& v : h.values()) v = std::max(v, 0.0);
  }
  return h;
}

Matrix gnn_aggregate(const NormalizedAdjacency& adj, const Matrix& x, const GnnEnsemble& ensemble,
                     bool normalize_blocks) {
  Matrix out(x.rows(), ensemble.width());
  for (std::size_t m = 0; m < ensemble.members.size(); ++m) {
    Matrix h = gcn_forward(adj, x, ensemble.members[m]);
    if (h.cols() != ensemble.hidden) throw ValidationError("gnn_aggregate: member width mismatch");
    set_column_block(out, h, m * ensemble.hidden);
  }
  if (normalize_blocks && ensemble.hidden > 0) normalize_row_blocks(out, ensemble.hidden);
  return out;
}

ViewSet compute_views(std::string task, const Matrix& x, const TaskGraph& g,
                      const GnnEnsemble& ensemble, const ViewOptions& options) {
  ViewSet views;
  views.task = std::move(task);
  views.base = x;
  if (options.with_adj_view) {
    views.adj_view = adjacency_aggregate(g, x, options.l_hops, options.normalize_blocks);
  }
  if (options.with_gnn_view) {
    views.gnn_view = gnn_aggregate(normalize_adjacency(g), x, ensemble, options.normalize_blocks);
  }
  return views;
}

}  // namespace ctlp
