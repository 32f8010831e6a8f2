#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ctlp {

/// Pipeline configurations, one per row of the baseline comparison.
enum class Mode { kZeroShot, kEmbSim, kGraphSim, kLLlm, kGlipGold, kOurs, kOracle };

const char* to_string(Mode mode);
Mode parse_mode(std::string_view name);

enum class MecForm {
  kCosine,             // +mean cosine over negative edges (default)
  kLiteralInnerProduct // -mean raw inner product, as literally written
};

const char* to_string(MecForm form);
MecForm parse_mec_form(std::string_view name);

struct LlmSettings {
  std::string kind = "mock";  // "mock" or "http"
  std::string base_url;
  std::string model_name;
  std::string token_env;  // environment variable holding the bearer token
  std::size_t max_in_flight = 4;
  std::size_t max_attempts = 5;
  double backoff_initial_ms = 200.0;
  double temperature = 0.0;
  std::size_t max_tokens = 8;
  double timeout_s = 60.0;
  std::string log_path;  // JSONL request/response log; empty disables

  // Mock-only: "cluster" (cluster oracle), "gold" (always correct), "constant".
  std::string mock_policy = "cluster";
  std::string mock_sidecar;
  std::size_t mock_constant_choice = 0;
};

struct DataPaths {
  std::string source;
  std::string target_pool;
  std::string target_test;
  std::string source_embeddings;
  std::string target_pool_embeddings;
  std::string target_pool_pair_embeddings;
  std::string target_test_embeddings;
  std::string source_task;
  std::string target_task;
  std::string prompts_dir;
};

struct RunConfig {
  std::size_t k_graph = 20;
  std::size_t l_hops = 2;
  std::vector<std::size_t> gnn_layer_spec = {1, 1, 2, 2};
  std::size_t gnn_hidden = 128;
  std::size_t k_shots = 1;
  std::size_t gat_hidden = 64;
  double lr = 0.005;
  std::size_t epochs = 25;
  double lambda_mec = 0.4;
  std::uint64_t seed = 0;
  Mode mode = Mode::kOurs;
  LlmSettings llm;
  DataPaths data;

  std::size_t seed_size = 100;
  std::optional<std::size_t> k_pos;  // defaults to k_graph
  bool symmetrize = true;
  bool normalize_blocks = true;
  bool use_adj_view = true;
  bool use_gnn_view = true;
  MecForm mec_form = MecForm::kCosine;
  bool pool_includes_seed = true;
  unsigned threads = 0;

  std::size_t positive_k() const { return k_pos.value_or(k_graph); }
};

// Throws ConfigError on any violated constraint.
void validate(const RunConfig& config);

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);
// Reads a JSON config; relative data paths resolve against the file's folder.
RunConfig load_config(const std::filesystem::path& path);

}  // namespace ctlp
