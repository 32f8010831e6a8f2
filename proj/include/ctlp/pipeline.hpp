#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctlp/aggregate.hpp"
#include "ctlp/config.hpp"
#include "ctlp/datamodel.hpp"
#include "ctlp/glip.hpp"
#include "ctlp/graphsim.hpp"
#include "ctlp/llm.hpp"

namespace ctlp {

struct PipelineInputs {
  Dataset source;
  EmbeddingMatrix source_emb;
  Dataset pool;  // D^T = D^L ∪ D^U before the split
  EmbeddingMatrix pool_emb;
  EmbeddingMatrix pool_pair_emb;
  Dataset test;
  EmbeddingMatrix test_emb;
  PromptSpec prompt;  // target task definition
};

// Loads and validates every dataset and embedding named in `config.data`.
PipelineInputs load_inputs(const RunConfig& config);

// Top-K pool rows by cosine to `query`, returned in prompt order (ascending
// score, most similar last). Ties rank the lower index higher.
std::vector<std::size_t> retrieve_in_task_demos(std::span<const double> query,
                                                const Matrix& pool_emb, std::size_t k);

// Fraction of exact matches. Throws on an empty prediction set or missing gold.
double accuracy(const PseudoLabeledSet& predictions, std::span<const Dataset* const> gold);
double accuracy(const PseudoLabeledSet& predictions, const Dataset& gold);
// Unanswered entries count as wrong.
double accuracy(std::span<const std::optional<std::size_t>> answers, const Dataset& gold);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct RunReport {
  Mode mode = Mode::kOurs;
  std::uint64_t seed = 0;
  std::size_t source_size = 0;
  std::size_t seed_size = 0;
  std::size_t unlabeled_size = 0;
  std::size_t test_size = 0;
  std::size_t seed_labeled = 0;
  std::size_t seed_dropped = 0;
  std::size_t propagated = 0;
  std::size_t pool_labeled = 0;
  std::optional<double> seed_accuracy;
  std::optional<double> propagation_accuracy;
  double test_accuracy = 0.0;
  std::size_t test_unparsed = 0;
  std::size_t llm_calls_seed = 0;
  std::size_t llm_calls_unlabeled = 0;
  std::size_t llm_calls_test = 0;
  std::vector<StageTiming> timings;
  nlohmann::json config;

  std::size_t llm_calls() const { return llm_calls_seed + llm_calls_unlabeled + llm_calls_test; }
  nlohmann::json to_json(bool include_timings = true) const;
  std::string to_table() const;
};

struct RunArtifacts {
  Dataset seed;
  Dataset unlabeled;
  std::optional<SelectionResult> seed_selection;
  std::optional<SelectionResult> test_selection;
  PseudoLabeledSet seed_labels;
  PseudoLabeledSet propagated;
  PseudoLabeledSet pool_labels;
  std::optional<TrainResult> glip;
  std::vector<std::optional<std::size_t>> test_predictions;
  std::vector<std::string> test_raw;
};

struct RunOutput {
  RunReport report;
  RunArtifacts artifacts;
};

struct RunOptions {
  std::filesystem::path out_dir;  // empty: nothing is written
  bool dump_graphs = false;
  bool dump_selections = false;
};

// Runs one baseline mode end to end. Mode/input mismatches are reported
// before the first LLM call.
RunOutput run_mode(const RunConfig& config, const PipelineInputs& inputs, LlmEndpoint& endpoint,
                   const RunOptions& options = {});

// ---------------------------------------------------------------------------
// Individual stages. Each reads its predecessors' artifacts from `out_dir`
// and writes its own, so any stage can be rerun from disk.

enum class Stage { kSelect, kLabelSeed, kPropagate, kRunIcl, kEval };

const char* to_string(Stage stage);

void run_stage(Stage stage, const RunConfig& config, const PipelineInputs& inputs,
               LlmEndpoint* endpoint, const RunOptions& options);

// Shared building blocks, exposed for tests.
std::pair<Dataset, Dataset> split_for_run(const RunConfig& config, const Dataset& pool);
GnnEnsemble ensemble_for_run(const RunConfig& config, std::size_t d_in);
ViewMask view_mask_for(const RunConfig& config);

// Cross-task selection of source demos for `targets`, which are rows of
// `graph_rows` (the set the target graph is built on).
SelectionResult select_cross_task(const RunConfig& config, const PipelineInputs& inputs,
                                  const Dataset& graph_rows, const Matrix& graph_emb,
                                  const Dataset& targets, const RunOptions& options = {},
                                  const std::string& dump_prefix = {});

}  // namespace ctlp
