#include "ctlp/graphsim.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "ctlp/error.hpp"
#include "ctlp/graph.hpp"
#include "ctlp/parallel.hpp"

namespace ctlp {

namespace {

double view_cosine(std::span<const double> a, std::span<const double> b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

void check_view(const Matrix& t, const Matrix& s, std::size_t t_rows, std::size_t s_rows,
                const char* name) {
  if (t.rows() != t_rows || s.rows() != s_rows) {
    throw ConfigError(std::string(name) + " view missing or misaligned");
  }
  if (t.cols() != s.cols()) {
    throw ConfigError(std::string(name) + " view width differs across tasks (" +
                      std::to_string(t.cols()) + " vs " + std::to_string(s.cols()) + ")");
  }
}

void check_views(const ViewSet& target, const ViewSet& source, ViewMask mask) {
  if (mask.count() == 0) throw ConfigError("at least one view must be enabled");
  const auto nt = target.rows();
  const auto ns = source.rows();
  if (mask.base) check_view(target.base, source.base, nt, ns, "base");
  if (mask.adj) check_view(target.adj_view, source.adj_view, nt, ns, "adjacency");
  if (mask.gnn) check_view(target.gnn_view, source.gnn_view, nt, ns, "gnn");
}

}  // namespace

double cross_task_similarity(const ViewSet& target, const ViewSet& source, std::size_t ti,
                             std::size_t sj, ViewMask mask) {
  check_views(target, source, mask);
  double sum = 0.0;
  if (mask.base) sum += view_cosine(target.base.row(ti), source.base.row(sj));
  if (mask.adj) sum += view_cosine(target.adj_view.row(ti), source.adj_view.row(sj));
  if (mask.gnn) sum += view_cosine(target.gnn_view.row(ti), source.gnn_view.row(sj));
  return sum / static_cast<double>(mask.count());
}

Matrix cosine_score_matrix(const Matrix& target, const Matrix& source, unsigned threads) {
  if (target.cols() != source.cols()) {
    throw ConfigError("embedding width differs across tasks (" + std::to_string(target.cols()) +
                      " vs " + std::to_string(source.cols()) + ")");
  }
  Matrix t = target;
  Matrix s = source;
  normalize_rows(t);
  normalize_rows(s);
  Matrix out(t.rows(), s.rows());
  parallel_for(
      t.rows(),
      [&](std::size_t i) {
        auto ti = t.row(i);
        auto dst = out.row(i);
        for (std::size_t j = 0; j < s.rows(); ++j) dst[j] = std::clamp(dot(ti, s.row(j)), -1.0, 1.0);
      },
      threads);
  return out;
}

Matrix graphsim_scores(const ViewSet& target, const ViewSet& source, ViewMask mask,
                       unsigned threads) {
  check_views(target, source, mask);
  Matrix sum(target.rows(), source.rows());
  auto accumulate = [&](const Matrix& t, const Matrix& s) {
    const Matrix part = cosine_score_matrix(t, s, threads);
    auto& dst = sum.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += part.values()[i];
  };
  if (mask.base) accumulate(target.base, source.base);
  if (mask.adj) accumulate(target.adj_view, source.adj_view);
  if (mask.gnn) accumulate(target.gnn_view, source.gnn_view);
  const double n = static_cast<double>(mask.count());
  for (auto& v : sum.values()) v /= n;
  return sum;
}

Matrix embsim_scores(const Matrix& target, const Matrix& source, unsigned threads) {
  return cosine_score_matrix(target, source, threads);
}

std::vector<std::size_t> rank_top_k(std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const std::size_t take = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  idx.resize(take);
  return idx;
}

const SelectionResult::Entry* SelectionResult::find(std::string_view target_id) const {
  for (const auto& e : entries) {
    if (e.target_id == target_id) return &e;
  }
  return nullptr;
}

SelectionResult select_source_examples(const Dataset& target, const Dataset& source,
                                       const Matrix& scores, std::size_t k) {
  if (source.size() == 0) throw ValidationError("select_source_examples: empty source set");
  if (k == 0) throw ConfigError("select_source_examples: K must be >= 1");
  if (scores.rows() != target.size() || scores.cols() != source.size()) {
    throw ValidationError("select_source_examples: score matrix shape mismatch");
  }
  SelectionResult out;
  out.entries.reserve(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    SelectionResult::Entry entry{target.examples[i].id, {}};
    for (auto j : rank_top_k(scores.row(i), k)) {
      entry.picks.push_back({j, source.examples[j].id, scores(i, j)});
    }
    out.entries.push_back(std::move(entry));
  }
  return out;
}

std::string selection_to_jsonl(const SelectionResult& selection) {
  std::string out;
  for (const auto& e : selection.entries) {
    nlohmann::json picks = nlohmann::json::array();
    for (const auto& p : e.picks) picks.push_back({{"source_id", p.source_id}, {"score", p.score}});
    out += nlohmann::json{{"target_id", e.target_id}, {"selected", picks}}.dump();
    out += '\n';
  }
  return out;
}

SelectionResult selection_from_jsonl(std::string_view jsonl, const Dataset& source) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < source.size(); ++i) index.emplace(source.examples[i].id, i);

  SelectionResult out;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      SelectionResult::Entry entry{obj.at("target_id").get<std::string>(), {}};
      for (const auto& p : obj.at("selected")) {
        auto id = p.at("source_id").get<std::string>();
        auto it = index.find(id);
        if (it == index.end()) throw ValidationError("selection references unknown source '" + id + "'");
        entry.picks.push_back({it->second, std::move(id), p.at("score").get<double>()});
      }
      out.entries.push_back(std::move(entry));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad selection line: ") + e.what());
    }
  }
  return out;
}

}  // namespace ctlp
