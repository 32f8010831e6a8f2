#include "ctlp/config.hpp"

#include <set>

#include "ctlp/datamodel.hpp"
#include "ctlp/error.hpp"

namespace ctlp {

using nlohmann::json;

namespace {

constexpr std::pair<Mode, const char*> kModeNames[] = {
    {Mode::kZeroShot, "zero_shot"}, {Mode::kEmbSim, "embsim"},       {Mode::kGraphSim, "graphsim"},
    {Mode::kLLlm, "l_llm"},         {Mode::kGlipGold, "glip_gold"},  {Mode::kOurs, "ours"},
    {Mode::kOracle, "oracle"},
};

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + where + key + "'");
  }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
  }
}

}  // namespace

const char* to_string(Mode mode) {
  for (const auto& [m, name] : kModeNames) {
    if (m == mode) return name;
  }
  return "unknown";
}

Mode parse_mode(std::string_view name) {
  for (const auto& [m, n] : kModeNames) {
    if (name == n) return m;
  }
  throw ConfigError("unknown mode '" + std::string(name) + "'");
}

const char* to_string(MecForm form) {
  return form == MecForm::kCosine ? "cosine" : "literal_inner_product";
}

MecForm parse_mec_form(std::string_view name) {
  if (name == "cosine") return MecForm::kCosine;
  if (name == "literal_inner_product") return MecForm::kLiteralInnerProduct;
  throw ConfigError("unknown mec_form '" + std::string(name) + "'");
}

void validate(const RunConfig& c) {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(c.k_graph, "k_graph");
  positive(c.l_hops, "l_hops");
  positive(c.gnn_hidden, "gnn_hidden");
  positive(c.k_shots, "K_shots");
  positive(c.gat_hidden, "gat_hidden");
  positive(c.epochs, "epochs");
  if (c.gnn_layer_spec.empty()) throw ConfigError("gnn_layer_spec must be non-empty");
  for (auto layers : c.gnn_layer_spec) positive(layers, "gnn_layer_spec entry");
  if (!(c.lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(c.lambda_mec >= 0.0)) throw ConfigError("lambda_mec must be >= 0");
  if (c.llm.kind != "mock" && c.llm.kind != "http") {
    throw ConfigError("llm.kind must be 'mock' or 'http'");
  }
  positive(c.llm.max_in_flight, "llm.max_in_flight");
  positive(c.llm.max_attempts, "llm.max_attempts");
  if (c.llm.temperature != 0.0) throw ConfigError("llm.temperature must be 0");
  if (c.llm.kind == "mock" && c.llm.mock_policy != "cluster" && c.llm.mock_policy != "gold" &&
      c.llm.mock_policy != "constant") {
    throw ConfigError("llm.mock_policy must be cluster, gold or constant");
  }
}

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config root must be an object");
  reject_unknown_keys(j,
                      {"k_graph", "l_hops", "gnn_layer_spec", "gnn_hidden", "K_shots", "gat_hidden",
                       "lr", "epochs", "lambda_mec", "seed", "mode", "llm", "data", "seed_size",
                       "k_pos", "symmetrize", "normalize_blocks", "use_adj_view", "use_gnn_view",
                       "mec_form", "pool_includes_seed", "threads"},
                      "");
  RunConfig c;
  read_field(j, "k_graph", c.k_graph);
  read_field(j, "l_hops", c.l_hops);
  read_field(j, "gnn_layer_spec", c.gnn_layer_spec);
  read_field(j, "gnn_hidden", c.gnn_hidden);
  read_field(j, "K_shots", c.k_shots);
  read_field(j, "gat_hidden", c.gat_hidden);
  read_field(j, "lr", c.lr);
  read_field(j, "epochs", c.epochs);
  read_field(j, "lambda_mec", c.lambda_mec);
  read_field(j, "seed", c.seed);
  read_field(j, "seed_size", c.seed_size);
  read_field(j, "symmetrize", c.symmetrize);
  read_field(j, "normalize_blocks", c.normalize_blocks);
  read_field(j, "use_adj_view", c.use_adj_view);
  read_field(j, "use_gnn_view", c.use_gnn_view);
  read_field(j, "pool_includes_seed", c.pool_includes_seed);
  read_field(j, "threads", c.threads);
  if (auto it = j.find("k_pos"); it != j.end() && !it->is_null()) {
    c.k_pos = it->get<std::size_t>();
  }
  if (auto it = j.find("mode"); it != j.end()) c.mode = parse_mode(it->get<std::string>());
  if (auto it = j.find("mec_form"); it != j.end()) {
    c.mec_form = parse_mec_form(it->get<std::string>());
  }

  if (auto it = j.find("llm"); it != j.end()) {
    const json& l = *it;
    reject_unknown_keys(l,
                        {"kind", "base_url", "model_name", "token_env", "max_in_flight",
                         "max_attempts", "backoff_initial_ms", "temperature", "max_tokens",
                         "timeout_s", "log_path", "mock_policy", "mock_sidecar",
                         "mock_constant_choice"},
                        "llm.");
    read_field(l, "kind", c.llm.kind);
    read_field(l, "base_url", c.llm.base_url);
    read_field(l, "model_name", c.llm.model_name);
    read_field(l, "token_env", c.llm.token_env);
    read_field(l, "max_in_flight", c.llm.max_in_flight);
    read_field(l, "max_attempts", c.llm.max_attempts);
    read_field(l, "backoff_initial_ms", c.llm.backoff_initial_ms);
    read_field(l, "temperature", c.llm.temperature);
    read_field(l, "max_tokens", c.llm.max_tokens);
    read_field(l, "timeout_s", c.llm.timeout_s);
    read_field(l, "log_path", c.llm.log_path);
    read_field(l, "mock_policy", c.llm.mock_policy);
    read_field(l, "mock_sidecar", c.llm.mock_sidecar);
    read_field(l, "mock_constant_choice", c.llm.mock_constant_choice);
  }

  if (auto it = j.find("data"); it != j.end()) {
    const json& d = *it;
    reject_unknown_keys(d,
                        {"source", "target_pool", "target_test", "source_embeddings",
                         "target_pool_embeddings", "target_pool_pair_embeddings",
                         "target_test_embeddings", "source_task", "target_task", "prompts_dir"},
                        "data.");
    read_field(d, "source", c.data.source);
    read_field(d, "target_pool", c.data.target_pool);
    read_field(d, "target_test", c.data.target_test);
    read_field(d, "source_embeddings", c.data.source_embeddings);
    read_field(d, "target_pool_embeddings", c.data.target_pool_embeddings);
    read_field(d, "target_pool_pair_embeddings", c.data.target_pool_pair_embeddings);
    read_field(d, "target_test_embeddings", c.data.target_test_embeddings);
    read_field(d, "source_task", c.data.source_task);
    read_field(d, "target_task", c.data.target_task);
    read_field(d, "prompts_dir", c.data.prompts_dir);
  }
  validate(c);
  return c;
}

json to_json(const RunConfig& c) {
  json j = {
      {"k_graph", c.k_graph},
      {"l_hops", c.l_hops},
      {"gnn_layer_spec", c.gnn_layer_spec},
      {"gnn_hidden", c.gnn_hidden},
      {"K_shots", c.k_shots},
      {"gat_hidden", c.gat_hidden},
      {"lr", c.lr},
      {"epochs", c.epochs},
      {"lambda_mec", c.lambda_mec},
      {"seed", c.seed},
      {"mode", to_string(c.mode)},
      {"seed_size", c.seed_size},
      {"k_pos", c.k_pos ? json(*c.k_pos) : json(nullptr)},
      {"symmetrize", c.symmetrize},
      {"normalize_blocks", c.normalize_blocks},
      {"use_adj_view", c.use_adj_view},
      {"use_gnn_view", c.use_gnn_view},
      {"mec_form", to_string(c.mec_form)},
      {"pool_includes_seed", c.pool_includes_seed},
      {"threads", c.threads},
  };
  j["llm"] = {
      {"kind", c.llm.kind},
      {"base_url", c.llm.base_url},
      {"model_name", c.llm.model_name},
      {"token_env", c.llm.token_env},
      {"max_in_flight", c.llm.max_in_flight},
      {"max_attempts", c.llm.max_attempts},
      {"backoff_initial_ms", c.llm.backoff_initial_ms},
      {"temperature", c.llm.temperature},
      {"max_tokens", c.llm.max_tokens},
      {"timeout_s", c.llm.timeout_s},
      {"log_path", c.llm.log_path},
      {"mock_policy", c.llm.mock_policy},
      {"mock_sidecar", c.llm.mock_sidecar},
      {"mock_constant_choice", c.llm.mock_constant_choice},
  };
  j["data"] = {
      {"source", c.data.source},
      {"target_pool", c.data.target_pool},
      {"target_test", c.data.target_test},
      {"source_embeddings", c.data.source_embeddings},
      {"target_pool_embeddings", c.data.target_pool_embeddings},
      {"target_pool_pair_embeddings", c.data.target_pool_pair_embeddings},
      {"target_test_embeddings", c.data.target_test_embeddings},
      {"source_task", c.data.source_task},
      {"target_task", c.data.target_task},
      {"prompts_dir", c.data.prompts_dir},
  };
  return j;
}

RunConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  RunConfig c = config_from_json(j);
  const auto base = path.parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  for (std::string* p : {&c.data.source, &c.data.target_pool, &c.data.target_test,
                         &c.data.source_embeddings, &c.data.target_pool_embeddings,
                         &c.data.target_pool_pair_embeddings, &c.data.target_test_embeddings,
                         &c.data.prompts_dir, &c.llm.mock_sidecar, &c.llm.log_path}) {
    resolve(*p);
  }
  return c;
}

}  // namespace ctlp
