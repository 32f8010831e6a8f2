#include "ctlp/pipeline.hpp"

#include <chrono>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "ctlp/graph.hpp"
#include "ctlp/rng.hpp"

namespace ctlp {

using nlohmann::json;

PipelineInputs load_inputs(const RunConfig& config) {
  const auto& d = config.data;
  auto require = [](const std::string& path, const char* key) {
    if (path.empty()) throw ConfigError(std::string("missing data.") + key);
  };
  require(d.source, "source");
  require(d.target_pool, "target_pool");
  require(d.target_test, "target_test");
  require(d.source_embeddings, "source_embeddings");
  require(d.target_pool_embeddings, "target_pool_embeddings");
  require(d.target_pool_pair_embeddings, "target_pool_pair_embeddings");
  require(d.target_test_embeddings, "target_test_embeddings");

  PipelineInputs in;
  in.source = load_dataset(d.source, DatasetRole::kSource, d.source_task);
  in.pool = load_dataset(d.target_pool, DatasetRole::kTargetUnlabeled, d.target_task);
  in.test = load_dataset(d.target_test, DatasetRole::kTargetTest, d.target_task);
  in.source_emb = load_embeddings(d.source_embeddings, in.source, EmbeddingKind::kExampleText);
  in.pool_emb = load_embeddings(d.target_pool_embeddings, in.pool, EmbeddingKind::kExampleText);
  in.pool_pair_emb = load_embeddings(d.target_pool_pair_embeddings, in.pool, EmbeddingKind::kPairText);
  in.test_emb = load_embeddings(d.target_test_embeddings, in.test, EmbeddingKind::kExampleText);
  if (!d.prompts_dir.empty() && !d.target_task.empty()) {
    in.prompt.task_definition = load_task_definition(d.prompts_dir, d.target_task);
    in.pool.task_definition = in.prompt.task_definition;
    in.test.task_definition = in.prompt.task_definition;
  }
  if (!d.prompts_dir.empty() && !d.source_task.empty()) {
    in.source.task_definition = load_task_definition(d.prompts_dir, d.source_task);
  }
  return in;
}

std::vector<std::size_t> retrieve_in_task_demos(std::span<const double> query,
                                                const Matrix& pool_emb, std::size_t k) {
  if (pool_emb.rows() == 0) throw ValidationError("retrieve_in_task_demos: empty pool");
  Matrix q(1, query.size(), std::vector<double>(query.begin(), query.end()));
  const Matrix scores = cosine_score_matrix(q, pool_emb, 1);
  auto ranked = rank_top_k(scores.row(0), k);
  std::reverse(ranked.begin(), ranked.end());
  return ranked;
}

double accuracy(const PseudoLabeledSet& predictions, std::span<const Dataset* const> gold) {
  if (predictions.empty()) throw ValidationError("accuracy: empty prediction set");
  std::size_t correct = 0;
  for (const auto& [id, label] : predictions.entries()) {
    const Example* ex = nullptr;
    for (const Dataset* ds : gold) {
      if (auto idx = ds->find(id)) {
        ex = &ds->examples[*idx];
        break;
      }
    }
    if (!ex || !ex->gold_label) throw ValidationError("accuracy: no gold label for '" + id + "'");
    correct += label.choice == *ex->gold_label ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

double accuracy(const PseudoLabeledSet& predictions, const Dataset& gold) {
  const Dataset* sets[] = {&gold};
  return accuracy(predictions, sets);
}

double accuracy(std::span<const std::optional<std::size_t>> answers, const Dataset& gold) {
  if (answers.empty()) throw ValidationError("accuracy: empty prediction set");
  if (answers.size() != gold.size()) throw ValidationError("accuracy: prediction count mismatch");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    const auto& g = gold.examples[i].gold_label;
    if (!g) throw ValidationError("accuracy: no gold label for '" + gold.examples[i].id + "'");
    correct += answers[i] && *answers[i] == *g ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(answers.size());
}

// ---------------------------------------------------------------------------

json RunReport::to_json(bool include_timings) const {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j = {
      {"mode", ctlp::to_string(mode)},
      {"seed", seed},
      {"counts",
       {{"source", source_size},
        {"seed", seed_size},
        {"unlabeled", unlabeled_size},
        {"test", test_size},
        {"seed_labeled", seed_labeled},
        {"seed_dropped", seed_dropped},
        {"propagated", propagated},
        {"pool_labeled", pool_labeled},
        {"test_unparsed", test_unparsed}}},
      {"accuracy",
       {{"seed", opt(seed_accuracy)},
        {"propagation", opt(propagation_accuracy)},
        {"test", test_accuracy}}},
      {"llm_calls",
       {{"seed", llm_calls_seed},
        {"unlabeled", llm_calls_unlabeled},
        {"test", llm_calls_test},
        {"total", llm_calls()}}},
      {"config", config},
  };
  if (include_timings) {
    json t = json::object();
    for (const auto& s : timings) t[s.stage] = s.seconds;
    j["wall_clock_s"] = t;
  }
  return j;
}

std::string RunReport::to_table() const {
  std::ostringstream out;
  auto pct = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(1) << 100.0 * v;
    return s.str();
  };
  auto row = [&](const std::string& k, const std::string& v) {
    out << "  " << std::left << std::setw(24) << k << v << '\n';
  };
  out << "mode " << ctlp::to_string(mode) << " (seed " << seed << ")\n";
  row("source examples", std::to_string(source_size));
  row("seed / unlabeled / test",
      std::to_string(seed_size) + " / " + std::to_string(unlabeled_size) + " / " +
          std::to_string(test_size));
  row("seed labeled (dropped)", std::to_string(seed_labeled) + " (" + std::to_string(seed_dropped) + ")");
  row("propagated", std::to_string(propagated));
  row("seed accuracy", seed_accuracy ? pct(*seed_accuracy) : "-");
  row("propagation accuracy", propagation_accuracy ? pct(*propagation_accuracy) : "-");
  row("test accuracy", pct(test_accuracy));
  row("test unparsed", std::to_string(test_unparsed));
  row("llm calls", std::to_string(llm_calls()) + " (seed " + std::to_string(llm_calls_seed) +
                       ", unlabeled " + std::to_string(llm_calls_unlabeled) + ", test " +
                       std::to_string(llm_calls_test) + ")");
  for (const auto& t : timings) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << t.seconds << " s";
    row("time " + t.stage, s.str());
  }
  return out.str();
}

// ---------------------------------------------------------------------------

namespace {

class StageTimer {
 public:
  StageTimer(std::vector<StageTiming>& sink, std::string name)
      : sink_(sink), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start_;
    sink_.push_back({name_, d.count()});
  }

 private:
  std::vector<StageTiming>& sink_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

void persist(const RunOptions& options, const std::string& name, std::string_view contents) {
  if (options.out_dir.empty()) return;
  write_file(options.out_dir / name, contents);
}

std::filesystem::path artifact(const RunOptions& options, const std::string& name) {
  if (options.out_dir.empty()) throw ConfigError("stage commands need --out");
  return options.out_dir / name;
}

bool uses_split(Mode mode) {
  return mode == Mode::kOurs || mode == Mode::kGlipGold || mode == Mode::kLLlm;
}

void check_mode_inputs(const RunConfig& config, const PipelineInputs& in, const Dataset& seed) {
  if (!in.test.all_gold()) throw ConfigError("test split needs gold labels for evaluation");
  switch (config.mode) {
    case Mode::kOracle:
      if (!in.pool.all_gold()) throw ConfigError("mode oracle needs gold labels on the whole pool");
      break;
    case Mode::kLLlm:
    case Mode::kGlipGold:
      if (!seed.all_gold()) {
        throw ConfigError(std::string("mode ") + to_string(config.mode) +
                          " needs gold labels on the seed split");
      }
      break;
    default:
      break;
  }
  if (uses_split(config.mode) && seed.size() == 0) throw ConfigError("seed split is empty");
  if (in.pool_emb.dim() != in.source_emb.dim() || in.test_emb.dim() != in.source_emb.dim()) {
    throw ConfigError("source and target embeddings have different widths");
  }
}

std::string split_to_json(const Dataset& seed, const Dataset& unlabeled) {
  json j = {{"seed", json::array()}, {"unlabeled", json::array()}};
  for (const auto& ex : seed.examples) j["seed"].push_back(ex.id);
  for (const auto& ex : unlabeled.examples) j["unlabeled"].push_back(ex.id);
  return j.dump(1) + "\n";
}

std::pair<Dataset, Dataset> split_from_json(std::string_view text, const Dataset& pool) {
  const json j = json::parse(text);
  auto pick = [&](const json& ids, DatasetRole role) {
    Dataset ds{role, pool.task_name, pool.task_definition, {}};
    for (const auto& id : ids) {
      auto idx = pool.find(id.get<std::string>());
      if (!idx) throw ValidationError("split references unknown id " + id.dump());
      ds.examples.push_back(pool.examples[*idx]);
    }
    return ds;
  };
  return {pick(j.at("seed"), DatasetRole::kTargetSeed),
          pick(j.at("unlabeled"), DatasetRole::kTargetUnlabeled)};
}

std::string predictions_to_jsonl(const Dataset& test, const RunArtifacts& a) {
  std::string out;
  for (std::size_t i = 0; i < test.size(); ++i) {
    json j = {{"id", test.examples[i].id},
              {"choice", a.test_predictions[i] ? json(*a.test_predictions[i]) : json(nullptr)},
              {"raw", a.test_raw[i]}};
    out += j.dump() + "\n";
  }
  return out;
}

void predictions_from_jsonl(std::string_view text, const Dataset& test, RunArtifacts& a) {
  std::unordered_map<std::string, std::pair<std::optional<std::size_t>, std::string>> by_id;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    std::optional<std::size_t> c;
    if (!j.at("choice").is_null()) c = j.at("choice").get<std::size_t>();
    by_id[j.at("id").get<std::string>()] = {c, j.value("raw", "")};
  }
  a.test_predictions.clear();
  a.test_raw.clear();
  for (const auto& ex : test.examples) {
    auto it = by_id.find(ex.id);
    if (it == by_id.end()) throw ValidationError("no prediction for test example '" + ex.id + "'");
    a.test_predictions.push_back(it->second.first);
    a.test_raw.push_back(it->second.second);
  }
}

// Prompts every test query with demos from `demos_for(i)`; records answers.
template <typename DemoFn>
std::size_t answer_test(const RunConfig& config, const PipelineInputs& in, LlmEndpoint& endpoint,
                        DemoFn demos_for, RunArtifacts& a, RunReport& r) {
  std::vector<QueryJob> jobs;
  jobs.reserve(in.test.size());
  for (std::size_t i = 0; i < in.test.size(); ++i) {
    const std::vector<Demo> demos = demos_for(i);
    jobs.push_back({build_prompt(in.prompt, demos, in.test.examples[i]), &in.test.examples[i]});
  }
  const AnswerOutcome out = ask_all(endpoint, jobs, config.llm.max_in_flight);
  if (out.failure) throw LlmError("test inference aborted: " + *out.failure);
  a.test_predictions = out.answers;
  a.test_raw = out.raw;
  r.test_unparsed = out.unparseable;
  return out.issued;
}

struct LabeledPool {
  std::vector<Demo> entries;
  Matrix emb;
};

LabeledPool labeled_pool(const PipelineInputs& in, const PseudoLabeledSet& labels) {
  LabeledPool pool;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < in.pool.size(); ++i) {
    if (const auto* l = labels.find(in.pool.examples[i].id)) {
      pool.entries.push_back({&in.pool.examples[i], l->choice});
      rows.push_back(i);
    }
  }
  pool.emb = Matrix(rows.size(), in.pool_emb.dim());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto src = in.pool_emb.data.row(rows[r]);
    std::copy(src.begin(), src.end(), pool.emb.row(r).begin());
  }
  return pool;
}

std::size_t in_task_icl(const RunConfig& config, const PipelineInputs& in, LlmEndpoint& endpoint,
                        const PseudoLabeledSet& pool_labels, RunArtifacts& a, RunReport& r) {
  const LabeledPool pool = labeled_pool(in, pool_labels);
  if (pool.entries.empty()) throw ValidationError("in-task ICL pool is empty");
  return answer_test(
      config, in, endpoint,
      [&](std::size_t i) {
        std::vector<Demo> demos;
        for (auto idx : retrieve_in_task_demos(in.test_emb.data.row(i), pool.emb, config.k_shots)) {
          demos.push_back(pool.entries[idx]);
        }
        return demos;
      },
      a, r);
}

std::size_t cross_task_icl(const RunConfig& config, const PipelineInputs& in,
                           LlmEndpoint& endpoint, const SelectionResult* selection,
                           RunArtifacts& a, RunReport& r) {
  return answer_test(
      config, in, endpoint,
      [&](std::size_t i) {
        std::vector<Demo> demos;
        if (!selection) return demos;
        const auto& picks = selection->entries.at(i).picks;
        const std::size_t take = std::min(config.k_shots, picks.size());
        for (std::size_t p = take; p-- > 0;) {
          const Example& ex = in.source.examples.at(picks[p].source_index);
          demos.push_back({&ex, *ex.gold_label});
        }
        return demos;
      },
      a, r);
}

struct PropagationResult {
  TrainResult glip;
  PseudoLabeledSet propagated;
};

PropagationResult propagate(const RunConfig& config, const PipelineInputs& in, const Dataset& seed,
                            const Dataset& unlabeled, const PseudoLabeledSet& seed_labels) {
  const GlipGraph graph = build_glip_graph(seed_labels, seed, unlabeled, in.pool,
                                           in.pool_pair_emb.data, config.positive_k(),
                                           config.threads);
  TrainResult trained = train_glip(graph, TrainOptions::from_config(config));

  // Seed examples whose answer was dropped are propagated to as well.
  Dataset targets = unlabeled;
  for (const auto& ex : seed.examples) {
    if (!seed_labels.contains(ex.id)) targets.examples.push_back(ex);
  }
  PseudoLabeledSet propagated = predict_labels(trained.model, graph, targets);
  return {std::move(trained), std::move(propagated)};
}

PseudoLabeledSet pool_from(const RunConfig& config, const PseudoLabeledSet& seed_labels,
                           const PseudoLabeledSet& propagated) {
  PseudoLabeledSet pool;
  if (config.pool_includes_seed) pool.merge(seed_labels);
  pool.merge(propagated);
  return pool;
}

std::optional<double> gold_accuracy(const PseudoLabeledSet& labels,
                                    std::initializer_list<const Dataset*> sets) {
  if (labels.empty()) return std::nullopt;
  for (const auto& [id, l] : labels.entries()) {
    bool has_gold = false;
    for (const Dataset* ds : sets) {
      if (auto idx = ds->find(id)) has_gold = ds->examples[*idx].gold_label.has_value();
      if (has_gold) break;
    }
    if (!has_gold) return std::nullopt;
  }
  std::vector<const Dataset*> v(sets);
  return accuracy(labels, v);
}

void write_glip_artifacts(const RunOptions& options, const TrainResult& glip) {
  persist(options, "model.bin", encode_model(glip.model));
  persist(options, "train_state.json", train_state_to_json(glip.state).dump(1) + "\n");
}

}  // namespace

// ---------------------------------------------------------------------------

std::pair<Dataset, Dataset> split_for_run(const RunConfig& config, const Dataset& pool) {
  return split_target(pool, std::min(config.seed_size, pool.size()), derive_key(config.seed, "split"));
}

GnnEnsemble ensemble_for_run(const RunConfig& config, std::size_t d_in) {
  return init_gnn_ensemble(derive_key(config.seed, "gnn_ensemble"), config.gnn_layer_spec, d_in,
                           config.gnn_hidden);
}

ViewMask view_mask_for(const RunConfig& config) {
  if (config.mode == Mode::kEmbSim) return ViewMask::embsim();
  return {true, config.use_adj_view, config.use_gnn_view};
}

SelectionResult select_cross_task(const RunConfig& config, const PipelineInputs& in,
                                  const Dataset& graph_rows, const Matrix& graph_emb,
                                  const Dataset& targets, const RunOptions& options,
                                  const std::string& dump_prefix) {
  const ViewMask mask = view_mask_for(config);
  const Matrix target_emb = gather_example_rows(graph_emb, graph_rows, targets);
  Matrix scores;
  if (mask.count() == 1 && mask.base) {
    scores = embsim_scores(target_emb, in.source_emb.data, config.threads);
  } else {
    const KnnOptions knn{config.symmetrize, {}, config.threads};
    const TaskGraph source_graph = build_knn_graph(in.source_emb.data, config.k_graph, knn);
    const TaskGraph target_graph = build_knn_graph(graph_emb, config.k_graph, knn);
    if (options.dump_graphs) {
      persist(options, dump_prefix + "source_graph.jsonl", graph_to_jsonl(source_graph));
      persist(options, dump_prefix + "target_graph.jsonl", graph_to_jsonl(target_graph));
    }
    const GnnEnsemble ensemble = ensemble_for_run(config, graph_emb.cols());
    const ViewOptions vo{config.l_hops, config.normalize_blocks, mask.adj, mask.gnn};
    const ViewSet source_views =
        compute_views(in.source.task_name, in.source_emb.data, source_graph, ensemble, vo);
    ViewSet target_views = compute_views(graph_rows.task_name, graph_emb, target_graph, ensemble, vo);
    target_views.base = target_emb;
    if (mask.adj) target_views.adj_view = gather_example_rows(target_views.adj_view, graph_rows, targets);
    if (mask.gnn) target_views.gnn_view = gather_example_rows(target_views.gnn_view, graph_rows, targets);
    scores = graphsim_scores(target_views, source_views, mask, config.threads);
  }
  return select_source_examples(targets, in.source, scores, config.k_shots);
}

RunOutput run_mode(const RunConfig& config, const PipelineInputs& in, LlmEndpoint& endpoint,
                   const RunOptions& options) {
  validate(config);
  RunOutput out;
  RunReport& r = out.report;
  RunArtifacts& a = out.artifacts;
  r.mode = config.mode;
  r.seed = config.seed;
  r.config = to_json(config);
  r.source_size = in.source.size();
  r.test_size = in.test.size();

  std::tie(a.seed, a.unlabeled) = split_for_run(config, in.pool);
  check_mode_inputs(config, in, a.seed);
  if (uses_split(config.mode)) {
    r.seed_size = a.seed.size();
    r.unlabeled_size = a.unlabeled.size();
    persist(options, "split.json", split_to_json(a.seed, a.unlabeled));
  }

  CountingEndpoint counter(endpoint);
  switch (config.mode) {
    case Mode::kZeroShot: {
      StageTimer t(r.timings, "icl");
      r.llm_calls_test = cross_task_icl(config, in, counter, nullptr, a, r);
      break;
    }
    case Mode::kEmbSim:
    case Mode::kGraphSim: {
      {
        StageTimer t(r.timings, "select");
        a.test_selection = select_cross_task(config, in, in.test, in.test_emb.data, in.test, options);
      }
      if (options.dump_selections) {
        persist(options, "test_selections.jsonl", selection_to_jsonl(*a.test_selection));
      }
      StageTimer t(r.timings, "icl");
      r.llm_calls_test = cross_task_icl(config, in, counter, &*a.test_selection, a, r);
      break;
    }
    case Mode::kOurs: {
      {
        StageTimer t(r.timings, "select");
        a.seed_selection = select_cross_task(config, in, in.pool, in.pool_emb.data, a.seed, options);
        persist(options, "selections.jsonl", selection_to_jsonl(*a.seed_selection));
      }
      {
        StageTimer t(r.timings, "label_seed");
        try {
          SeedLabelOutcome seed_out = pseudo_label_seed(a.seed, *a.seed_selection, in.source,
                                                        in.prompt, counter, config.k_shots,
                                                        config.llm.max_in_flight);
          a.seed_labels = std::move(seed_out.labels);
          r.seed_dropped = seed_out.dropped.size();
          r.llm_calls_seed = seed_out.llm_calls;
        } catch (const LabelingAborted& e) {
          persist(options, "seed_labels.partial.jsonl", serialize_pseudo_labels(e.partial()));
          throw;
        }
        persist(options, "seed_labels.jsonl", serialize_pseudo_labels(a.seed_labels));
      }
      if (a.seed_labels.empty()) throw ValidationError("every seed answer was dropped");
      {
        StageTimer t(r.timings, "propagate");
        PropagationResult p = propagate(config, in, a.seed, a.unlabeled, a.seed_labels);
        a.glip = std::move(p.glip);
        a.propagated = std::move(p.propagated);
        write_glip_artifacts(options, *a.glip);
      }
      break;
    }
    case Mode::kGlipGold: {
      a.seed_labels = gold_labels(a.seed);
      StageTimer t(r.timings, "propagate");
      PropagationResult p = propagate(config, in, a.seed, a.unlabeled, a.seed_labels);
      a.glip = std::move(p.glip);
      a.propagated = std::move(p.propagated);
      write_glip_artifacts(options, *a.glip);
      break;
    }
    case Mode::kLLlm: {
      a.seed_labels = gold_labels(a.seed);
      StageTimer t(r.timings, "label_unlabeled");
      const LabeledPool pool = labeled_pool(in, a.seed_labels);
      const Matrix unl_emb = gather_example_rows(in.pool_emb.data, in.pool, a.unlabeled);
      std::vector<QueryJob> jobs;
      for (std::size_t i = 0; i < a.unlabeled.size(); ++i) {
        std::vector<Demo> demos;
        for (auto idx : retrieve_in_task_demos(unl_emb.row(i), pool.emb, config.k_shots)) {
          demos.push_back(pool.entries[idx]);
        }
        jobs.push_back({build_prompt(in.prompt, demos, a.unlabeled.examples[i]),
                        &a.unlabeled.examples[i]});
      }
      const AnswerOutcome answers = ask_all(counter, jobs, config.llm.max_in_flight);
      r.llm_calls_unlabeled = answers.issued;
      for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (answers.answers[i]) {
          a.propagated.set(a.unlabeled.examples[i].id, {*answers.answers[i], Provenance::kLlmSeed, 1.0});
        }
      }
      if (answers.failure) {
        persist(options, "propagated.partial.jsonl", serialize_pseudo_labels(a.propagated));
        throw LlmError("labeling of the unlabeled split aborted: " + *answers.failure);
      }
      break;
    }
    case Mode::kOracle:
      a.pool_labels = gold_labels(in.pool);
      break;
  }

  if (config.mode == Mode::kOurs || config.mode == Mode::kGlipGold || config.mode == Mode::kLLlm) {
    a.pool_labels = pool_from(config, a.seed_labels, a.propagated);
    persist(options, "propagated.jsonl", serialize_pseudo_labels(a.propagated));
    persist(options, "pool_labels.jsonl", serialize_pseudo_labels(a.pool_labels));
    r.seed_labeled = a.seed_labels.size();
    r.propagated = a.propagated.size();
    r.seed_accuracy = gold_accuracy(a.seed_labels, {&a.seed});
    r.propagation_accuracy = gold_accuracy(a.propagated, {&a.unlabeled, &a.seed});
  }
  if (config.mode == Mode::kOracle || uses_split(config.mode)) {
    r.pool_labeled = a.pool_labels.size();
    StageTimer t(r.timings, "icl");
    r.llm_calls_test = in_task_icl(config, in, counter, a.pool_labels, a, r);
  }

  r.test_accuracy = accuracy(a.test_predictions, in.test);
  persist(options, "predictions.jsonl", predictions_to_jsonl(in.test, a));
  persist(options, "report.json", r.to_json().dump(1) + "\n");
  persist(options, "report.txt", r.to_table());
  return out;
}

// ---------------------------------------------------------------------------

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::kSelect:
      return "select";
    case Stage::kLabelSeed:
      return "label-seed";
    case Stage::kPropagate:
      return "propagate";
    case Stage::kRunIcl:
      return "run-icl";
    case Stage::kEval:
      return "eval";
  }
  return "unknown";
}

void run_stage(Stage stage, const RunConfig& config, const PipelineInputs& in,
               LlmEndpoint* endpoint, const RunOptions& options) {
  validate(config);
  auto need_endpoint = [&]() -> LlmEndpoint& {
    if (!endpoint) throw ConfigError(std::string(to_string(stage)) + " needs an LLM endpoint");
    return *endpoint;
  };
  auto load_split = [&] { return split_from_json(read_file(artifact(options, "split.json")), in.pool); };
  const bool cross_task = config.mode == Mode::kEmbSim || config.mode == Mode::kGraphSim;

  RunArtifacts a;
  RunReport r;
  r.mode = config.mode;
  r.seed = config.seed;
  r.config = to_json(config);

  switch (stage) {
    case Stage::kSelect: {
      if (cross_task) {
        const auto sel = select_cross_task(config, in, in.test, in.test_emb.data, in.test, options);
        write_file(artifact(options, "test_selections.jsonl"), selection_to_jsonl(sel));
        return;
      }
      auto [seed, unlabeled] = split_for_run(config, in.pool);
      write_file(artifact(options, "split.json"), split_to_json(seed, unlabeled));
      const auto sel = select_cross_task(config, in, in.pool, in.pool_emb.data, seed, options);
      write_file(artifact(options, "selections.jsonl"), selection_to_jsonl(sel));
      return;
    }
    case Stage::kLabelSeed: {
      const auto [seed, unlabeled] = load_split();
      const auto sel = selection_from_jsonl(read_file(artifact(options, "selections.jsonl")), in.source);
      try {
        const auto outcome = pseudo_label_seed(seed, sel, in.source, in.prompt, need_endpoint(),
                                               config.k_shots, config.llm.max_in_flight);
        write_file(artifact(options, "seed_labels.jsonl"), serialize_pseudo_labels(outcome.labels));
        write_file(artifact(options, "seed_dropped.json"), json(outcome.dropped).dump() + "\n");
      } catch (const LabelingAborted& e) {
        write_file(artifact(options, "seed_labels.partial.jsonl"), serialize_pseudo_labels(e.partial()));
        throw;
      }
      return;
    }
    case Stage::kPropagate: {
      const auto [seed, unlabeled] = load_split();
      const PseudoLabeledSet seed_labels = config.mode == Mode::kGlipGold
                                               ? gold_labels(seed)
                                               : load_pseudo_labels(artifact(options, "seed_labels.jsonl"));
      validate(seed_labels, {&seed});
      PropagationResult p = propagate(config, in, seed, unlabeled, seed_labels);
      artifact(options, "model.bin");
      write_glip_artifacts(options, p.glip);
      write_file(artifact(options, "propagated.jsonl"), serialize_pseudo_labels(p.propagated));
      write_file(artifact(options, "pool_labels.jsonl"),
                 serialize_pseudo_labels(pool_from(config, seed_labels, p.propagated)));
      return;
    }
    case Stage::kRunIcl: {
      if (config.mode == Mode::kZeroShot) {
        cross_task_icl(config, in, need_endpoint(), nullptr, a, r);
      } else if (cross_task) {
        const auto sel =
            selection_from_jsonl(read_file(artifact(options, "test_selections.jsonl")), in.source);
        cross_task_icl(config, in, need_endpoint(), &sel, a, r);
      } else {
        const PseudoLabeledSet pool = config.mode == Mode::kOracle
                                          ? gold_labels(in.pool)
                                          : load_pseudo_labels(artifact(options, "pool_labels.jsonl"));
        validate(pool, {&in.pool});
        in_task_icl(config, in, need_endpoint(), pool, a, r);
      }
      write_file(artifact(options, "predictions.jsonl"), predictions_to_jsonl(in.test, a));
      return;
    }
    case Stage::kEval: {
      predictions_from_jsonl(read_file(artifact(options, "predictions.jsonl")), in.test, a);
      r.test_size = in.test.size();
      r.source_size = in.source.size();
      r.test_accuracy = accuracy(a.test_predictions, in.test);
      for (const auto& p : a.test_predictions) r.test_unparsed += p ? 0 : 1;
      write_file(artifact(options, "eval.json"), r.to_json(false).dump(1) + "\n");
      spdlog::info("test accuracy {:.4f} over {} examples", r.test_accuracy, r.test_size);
      return;
    }
  }
}

}  // namespace ctlp
