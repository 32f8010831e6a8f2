#include <set>

#include <gtest/gtest.h>

#include "ctlp/pipeline.hpp"
#include "ctlp/rng.hpp"
#include "synthetic.hpp"

using namespace ctlp;

namespace {

synth::ClusterFixture small_fixture(Mode mode) {
  synth::ClusterFixtureParams p;
  p.clusters = 4;
  p.source_per_cluster = 12;
  p.pool_size = 60;
  p.test_size = 30;
  p.seed_size = 12;
  p.dim = 16;
  p.choices = 3;
  synth::ClusterFixture fx = synth::make_cluster_fixture(p);
  fx.config.mode = mode;
  fx.config.k_graph = 5;
  fx.config.gnn_hidden = 16;
  fx.config.gat_hidden = 16;
  return fx;
}

MockLlm mock_for(const synth::ClusterFixture& fx, MockPolicy policy = MockPolicy::kClusterOracle) {
  return MockLlm(policy, fx.facts, derive_key(fx.config.seed, "mock_llm"));
}

RunOutput run(const synth::ClusterFixture& fx, Mode mode, MockPolicy policy = MockPolicy::kClusterOracle,
              const RunOptions& options = {}) {
  RunConfig config = fx.config;
  config.mode = mode;
  MockLlm llm = mock_for(fx, policy);
  return run_mode(config, fx.inputs, llm, options);
}

}  // namespace

TEST(RetrieveInTaskDemos, AscendingScoreOrder) {
  const std::vector<double> query = {1.0, 0.0};
  Matrix pool(3, 2);
  const double c[3] = {0.1, 0.8, 0.5};
  for (std::size_t i = 0; i < 3; ++i) {
    pool(i, 0) = c[i];
    pool(i, 1) = std::sqrt(1.0 - c[i] * c[i]);
  }
  EXPECT_EQ(retrieve_in_task_demos(query, pool, 2), (std::vector<std::size_t>{2, 1}));
  EXPECT_EQ(retrieve_in_task_demos(query, pool, 5), (std::vector<std::size_t>{0, 2, 1}));
}

TEST(Accuracy, ExamplesAndErrors) {
  const Dataset gold = synth::make_dataset(DatasetRole::kTargetTest, "t", "t", 4, 3, 1);
  PseudoLabeledSet pred = gold_labels(gold);
  EXPECT_DOUBLE_EQ(accuracy(pred, gold), 1.0);
  PseudoLabel wrong = *pred.find("t-2");
  wrong.choice = (wrong.choice + 1) % 3;
  pred.set("t-2", wrong);
  EXPECT_DOUBLE_EQ(accuracy(pred, gold), 0.75);

  std::vector<std::optional<std::size_t>> answers;
  for (const auto& ex : gold.examples) answers.push_back(ex.gold_label);
  answers[0].reset();
  EXPECT_DOUBLE_EQ(accuracy(answers, gold), 0.75);

  EXPECT_THROW(accuracy(PseudoLabeledSet{}, gold), ValidationError);
  Dataset no_gold = gold;
  no_gold.examples[1].gold_label.reset();
  EXPECT_THROW(accuracy(gold_labels(gold), no_gold), ValidationError);
}

TEST(SplitForRun, DisjointDeterministicAndSeeded) {
  const synth::ClusterFixture fx = small_fixture(Mode::kOurs);
  const auto [seed, unl] = split_for_run(fx.config, fx.inputs.pool);
  EXPECT_EQ(seed.size(), 12u);
  EXPECT_EQ(unl.size(), 48u);
  std::set<std::string> ids;
  for (const auto* ds : {&seed, &unl}) {
    for (const auto& ex : ds->examples) ids.insert(ex.id);
  }
  EXPECT_EQ(ids.size(), 60u);
  EXPECT_EQ(split_for_run(fx.config, fx.inputs.pool).first.examples, seed.examples);
  RunConfig other = fx.config;
  other.seed = 1;
  EXPECT_NE(split_for_run(other, fx.inputs.pool).first.examples, seed.examples);
}

TEST(RunMode, InputMismatchFailsBeforeAnyCall) {
  const synth::ClusterFixture fx = small_fixture(Mode::kOurs);
  auto expect_config_error = [&](Mode mode, const PipelineInputs& inputs) {
    RunConfig config = fx.config;
    config.mode = mode;
    MockLlm llm = mock_for(fx);
    CountingEndpoint counter(llm);
    EXPECT_THROW(run_mode(config, inputs, counter), ConfigError) << to_string(mode);
    EXPECT_EQ(counter.calls(), 0u);
  };

  PipelineInputs no_test_gold = fx.inputs;
  no_test_gold.test.examples.back().gold_label.reset();
  expect_config_error(Mode::kZeroShot, no_test_gold);

  PipelineInputs partial_pool = fx.inputs;
  for (std::size_t i = 0; i < partial_pool.pool.size(); i += 2) partial_pool.pool.examples[i].gold_label.reset();
  expect_config_error(Mode::kOracle, partial_pool);

  PipelineInputs no_pool_gold = fx.inputs;
  for (auto& ex : no_pool_gold.pool.examples) ex.gold_label.reset();
  expect_config_error(Mode::kLLlm, no_pool_gold);
  expect_config_error(Mode::kGlipGold, no_pool_gold);

  PipelineInputs narrow = fx.inputs;
  narrow.test_emb.data = synth::uniform_matrix(narrow.test.size(), 8, 1);
  expect_config_error(Mode::kEmbSim, narrow);

  // Modes that never look at seed gold run fine without it.
  RunConfig config = fx.config;
  config.mode = Mode::kOurs;
  MockLlm llm = mock_for(fx);
  EXPECT_NO_THROW(run_mode(config, no_pool_gold, llm));
}

TEST(RunMode, CallBudgetsPerMode) {
  const synth::ClusterFixture fx = small_fixture(Mode::kOurs);
  const std::size_t test = 30, seed = 12, unl = 48;
  const std::vector<std::pair<Mode, std::size_t>> budgets = {
      {Mode::kZeroShot, test},    {Mode::kEmbSim, test},   {Mode::kGraphSim, test},
      {Mode::kOracle, test},      {Mode::kGlipGold, test}, {Mode::kOurs, seed + test},
      {Mode::kLLlm, unl + test}};
  for (const auto& [mode, expected] : budgets) {
    RunConfig config = fx.config;
    config.mode = mode;
    MockLlm llm = mock_for(fx);
    CountingEndpoint counter(llm);
    const RunOutput out = run_mode(config, fx.inputs, counter);
    EXPECT_EQ(counter.calls(), expected) << to_string(mode);
    EXPECT_EQ(out.report.llm_calls(), expected) << to_string(mode);
    EXPECT_EQ(out.artifacts.test_predictions.size(), test);
  }
}

TEST(RunMode, OracleSkipsLabelingAndUsesGoldPool) {
  const synth::ClusterFixture fx = small_fixture(Mode::kOracle);
  const RunOutput out = run(fx, Mode::kOracle);
  EXPECT_EQ(out.report.llm_calls_seed, 0u);
  EXPECT_EQ(out.report.llm_calls_unlabeled, 0u);
  EXPECT_EQ(out.artifacts.pool_labels, gold_labels(fx.inputs.pool));
  EXPECT_FALSE(out.artifacts.glip.has_value());
}

TEST(RunMode, PerfectSeedLabelsMakeOursMatchGlipGold) {
  const synth::ClusterFixture fx = small_fixture(Mode::kOurs);
  const RunOutput ours = run(fx, Mode::kOurs, MockPolicy::kGoldEcho);
  const RunOutput gold = run(fx, Mode::kGlipGold, MockPolicy::kGoldEcho);
  ASSERT_EQ(ours.artifacts.seed_labels.size(), gold.artifacts.seed_labels.size());
  for (const auto& [id, label] : gold.artifacts.seed_labels.entries()) {
    EXPECT_EQ(ours.artifacts.seed_labels.find(id)->choice, label.choice);
  }
  EXPECT_EQ(encode_model(ours.artifacts.glip->model), encode_model(gold.artifacts.glip->model));
  ASSERT_EQ(ours.artifacts.propagated.size(), gold.artifacts.propagated.size());
  for (const auto& [id, label] : gold.artifacts.propagated.entries()) {
    EXPECT_EQ(ours.artifacts.propagated.find(id)->choice, label.choice);
  }
  EXPECT_EQ(ours.artifacts.test_predictions, gold.artifacts.test_predictions);
  EXPECT_DOUBLE_EQ(*ours.report.seed_accuracy, 1.0);
}

TEST(RunMode, ReportIsDeterministicApartFromTimings) {
  const synth::ClusterFixture fx = small_fixture(Mode::kOurs);
  const RunOutput a = run(fx, Mode::kOurs);
  const RunOutput b = run(fx, Mode::kOurs);
  EXPECT_EQ(a.report.to_json(false), b.report.to_json(false));
  const auto j = a.report.to_json(false);
  EXPECT_EQ(j["mode"], "ours");
  EXPECT_EQ(j["counts"]["seed"], 12);
  EXPECT_EQ(j["llm_calls"]["total"], 42);
  EXPECT_FALSE(j.contains("wall_clock_s"));
  EXPECT_TRUE(a.report.to_json(true).contains("wall_clock_s"));
  EXPECT_NE(a.report.to_table().find("ours"), std::string::npos);
}

TEST(RunMode, WritesArtifacts) {
  const synth::ClusterFixture fx = small_fixture(Mode::kOurs);
  const auto dir = synth::fresh_temp_dir("pipeline-artifacts");
  run(fx, Mode::kOurs, MockPolicy::kClusterOracle, {dir, true, true});
  for (const char* name : {"split.json", "selections.jsonl", "seed_labels.jsonl", "model.bin",
                           "train_state.json", "propagated.jsonl", "pool_labels.jsonl",
                           "predictions.jsonl", "report.json", "report.txt", "source_graph.jsonl",
                           "target_graph.jsonl"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
  }
  const auto model = decode_model(read_file(dir / "model.bin"));
  EXPECT_EQ(model.hidden(), 16u);
}

TEST(RunStage, StageChainReproducesRunMode) {
  for (Mode mode : {Mode::kOurs, Mode::kGraphSim, Mode::kGlipGold}) {
    synth::ClusterFixture fx = small_fixture(mode);
    const auto whole = synth::fresh_temp_dir(std::string("pipeline-whole-") + to_string(mode));
    const auto staged = synth::fresh_temp_dir(std::string("pipeline-staged-") + to_string(mode));
    {
      MockLlm llm = mock_for(fx);
      run_mode(fx.config, fx.inputs, llm, {whole});
    }
    MockLlm llm = mock_for(fx);
    const RunOptions opts{staged};
    for (Stage s : {Stage::kSelect, Stage::kLabelSeed, Stage::kPropagate, Stage::kRunIcl, Stage::kEval}) {
      if ((mode == Mode::kGraphSim || mode == Mode::kGlipGold) && (s == Stage::kLabelSeed)) continue;
      if (mode == Mode::kGraphSim && s == Stage::kPropagate) continue;
      run_stage(s, fx.config, fx.inputs, &llm, opts);
    }
    EXPECT_EQ(read_file(staged / "predictions.jsonl"), read_file(whole / "predictions.jsonl")) << to_string(mode);
    if (mode != Mode::kGraphSim) {
      EXPECT_EQ(read_file(staged / "model.bin"), read_file(whole / "model.bin"));
      EXPECT_EQ(read_file(staged / "pool_labels.jsonl"), read_file(whole / "pool_labels.jsonl"));
    }
    const auto eval = nlohmann::json::parse(read_file(staged / "eval.json"));
    const auto report = nlohmann::json::parse(read_file(whole / "report.json"));
    EXPECT_EQ(eval["accuracy"]["test"], report["accuracy"]["test"]);
  }
}

TEST(RunStage, MissingPredecessorOrOutputIsError) {
  const synth::ClusterFixture fx = small_fixture(Mode::kOurs);
  MockLlm llm = mock_for(fx);
  EXPECT_THROW(run_stage(Stage::kSelect, fx.config, fx.inputs, &llm, {}), ConfigError);
  const auto dir = synth::fresh_temp_dir("pipeline-missing");
  EXPECT_THROW(run_stage(Stage::kPropagate, fx.config, fx.inputs, &llm, {dir}), Error);
  run_stage(Stage::kSelect, fx.config, fx.inputs, &llm, {dir});
  EXPECT_THROW(run_stage(Stage::kLabelSeed, fx.config, fx.inputs, nullptr, {dir}), ConfigError);
}

TEST(SelectCrossTask, EmbSimMaskMatchesPlainCosineRanking) {
  synth::ClusterFixture fx = small_fixture(Mode::kEmbSim);
  const SelectionResult sel =
      select_cross_task(fx.config, fx.inputs, fx.inputs.test, fx.inputs.test_emb.data, fx.inputs.test);
  const Matrix scores = embsim_scores(fx.inputs.test_emb.data, fx.inputs.source_emb.data);
  for (std::size_t i = 0; i < fx.inputs.test.size(); ++i) {
    std::vector<double> row(scores.row(i).begin(), scores.row(i).end());
    EXPECT_EQ(sel.entries[i].picks[0].source_index, rank_top_k(row, 1)[0]);
  }
}
