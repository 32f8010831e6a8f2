#include "ctlp/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "ctlp/error.hpp"
#include "ctlp/parallel.hpp"

namespace ctlp {

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ValidationError("cosine_similarity: dimension mismatch");
  const double nu = l2_norm(u);
  const double nv = l2_norm(v);
  if (nu == 0.0 || nv == 0.0) throw ValidationError("cosine_similarity: zero-norm input");
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

bool TaskGraph::has_edge(std::size_t i, std::size_t j) const {
  const auto& row = neighbors.at(i);
  return std::binary_search(row.begin(), row.end(), static_cast<std::uint32_t>(j));
}

std::vector<std::vector<std::uint32_t>> symmetrize(
    const std::vector<std::vector<std::uint32_t>>& directed) {
  std::vector<std::vector<std::uint32_t>> out(directed.size());
  for (std::size_t i = 0; i < directed.size(); ++i) {
    for (auto j : directed[i]) {
      out[i].push_back(j);
      out[j].push_back(static_cast<std::uint32_t>(i));
    }
  }
  for (auto& row : out) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
  return out;
}

TaskGraph build_knn_graph(const Matrix& x, std::size_t k, const KnnOptions& options) {
  const std::size_t n = x.rows();
  if (!options.groups.empty() && options.groups.size() != n) {
    throw ValidationError("build_knn_graph: group vector does not match row count");
  }

  Matrix unit = x;
  normalize_rows(unit);
  for (std::size_t i = 0; i < n; ++i) {
    if (l2_norm(unit.row(i)) == 0.0) {
      throw ValidationError("build_knn_graph: zero-norm row " + std::to_string(i));
    }
  }

  TaskGraph g;
  g.k = k;
  g.directed.assign(n, {});
  if (k > 0) {
    parallel_for(
        n,
        [&](std::size_t i) {
          std::vector<std::pair<double, std::uint32_t>> cand;
          cand.reserve(n);
          const auto ui = unit.row(i);
          for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            if (!options.groups.empty() && options.groups[j] == options.groups[i]) continue;
            cand.emplace_back(dot(ui, unit.row(j)), static_cast<std::uint32_t>(j));
          }
          const std::size_t take = std::min(k, cand.size());
          auto better = [](const auto& a, const auto& b) {
            return a.first > b.first || (a.first == b.first && a.second < b.second);
          };
          std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take),
                            cand.end(), better);
          auto& row = g.directed[i];
          row.reserve(take);
          for (std::size_t t = 0; t < take; ++t) row.push_back(cand[t].second);
        },
        options.threads);
  }

  g.symmetrized = options.symmetrize;
  if (options.symmetrize) {
    g.neighbors = symmetrize(g.directed);
  } else {
    g.neighbors = g.directed;
    for (auto& row : g.neighbors) std::sort(row.begin(), row.end());
  }
  return g;
}

NormalizedAdjacency normalize_adjacency(const TaskGraph& g) {
  const std::size_t n = g.n_nodes();
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(g.neighbors[i].size() + 1));
  }

  NormalizedAdjacency adj;
  adj.row_ptr.reserve(n + 1);
  adj.row_ptr.push_back(0);
  for (std::size_t i = 0; i < n; ++i) {
    // Neighbour rows are sorted; splice the self-loop in at its ordered spot.
    bool self_done = false;
    for (auto j : g.neighbors[i]) {
      if (!self_done && j > i) {
        adj.cols.push_back(static_cast<std::uint32_t>(i));
        adj.values.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[i]);
        self_done = true;
      }
      adj.cols.push_back(j);
      adj.values.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[j]);
    }
    if (!self_done) {
      adj.cols.push_back(static_cast<std::uint32_t>(i));
      adj.values.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[i]);
    }
    adj.row_ptr.push_back(adj.cols.size());
  }
  return adj;
}

Matrix NormalizedAdjacency::multiply(const Matrix& x) const {
  if (x.rows() != n_nodes()) throw ValidationError("NormalizedAdjacency: row mismatch");
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < n_nodes(); ++i) {
    auto dst = out.row(i);
    for (std::size_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e) {
      const double w = values[e];
      auto src = x.row(cols[e]);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += w * src[c];
    }
  }
  return out;
}

Matrix NormalizedAdjacency::to_dense() const {
  Matrix out(n_nodes(), n_nodes());
  for (std::size_t i = 0; i < n_nodes(); ++i) {
    for (std::size_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e) out(i, cols[e]) = values[e];
  }
  return out;
}

Matrix adjacency_multiply(const TaskGraph& g, const Matrix& y) {
  if (y.rows() != g.n_nodes()) throw ValidationError("adjacency_multiply: row mismatch");
  Matrix out(y.rows(), y.cols());
  for (std::size_t i = 0; i < g.n_nodes(); ++i) {
    auto dst = out.row(i);
    for (auto j : g.neighbors[i]) {
      auto src = y.row(j);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
  }
  return out;
}

std::string graph_to_jsonl(const TaskGraph& g) {
  std::string out;
  for (std::size_t i = 0; i < g.n_nodes(); ++i) {
    out += nlohmann::json{{"node", i}, {"neighbors", g.neighbors[i]}}.dump();
    out += '\n';
  }
  return out;
}

}  // namespace ctlp
