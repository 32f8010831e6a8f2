#pragma once

#include <span>
#include <string>
#include <vector>

#include "ctlp/aggregate.hpp"
#include "ctlp/datamodel.hpp"
#include "ctlp/matrix.hpp"

namespace ctlp {

// Which views take part in the averaged similarity. Base-only is EmbSim.
struct ViewMask {
  bool base = true;
  bool adj = true;
  bool gnn = true;

  std::size_t count() const noexcept { return std::size_t{base} + adj + gnn; }
  static ViewMask embsim() { return {true, false, false}; }
};

// Mean of per-view cosines between target row `ti` and source row `sj`. A view
// where either row is all-zero contributes 0 to the mean.
double cross_task_similarity(const ViewSet& target, const ViewSet& source, std::size_t ti,
                             std::size_t sj, ViewMask mask = {});

// Plain cosine for every (target row, source row) pair; zero rows score 0.
Matrix cosine_score_matrix(const Matrix& target, const Matrix& source, unsigned threads = 0);

// r̄ for every (target row, source row) pair.
Matrix graphsim_scores(const ViewSet& target, const ViewSet& source, ViewMask mask = {},
                       unsigned threads = 0);

// Single-view baseline: raw embedding cosine only.
Matrix embsim_scores(const Matrix& target, const Matrix& source, unsigned threads = 0);

// Indices of the K largest scores, best first; ties go to the lower index.
std::vector<std::size_t> rank_top_k(std::span<const double> scores, std::size_t k);

struct SelectionResult {
  struct Pick {
    std::size_t source_index = 0;
    std::string source_id;
    double score = 0.0;
  };
  struct Entry {
    std::string target_id;
    std::vector<Pick> picks;  // best first
  };
  std::vector<Entry> entries;  // one per target example, dataset order

  const Entry* find(std::string_view target_id) const;
};

SelectionResult select_source_examples(const Dataset& target, const Dataset& source,
                                       const Matrix& scores, std::size_t k);

// {"target_id": ..., "selected": [{"source_id": ..., "score": ...}, ...]} per line.
std::string selection_to_jsonl(const SelectionResult& selection);
SelectionResult selection_from_jsonl(std::string_view jsonl, const Dataset& source);

}  // namespace ctlp
