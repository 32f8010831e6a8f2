#include <cmath>

#include <gtest/gtest.h>

#include "ctlp/graph.hpp"
#include "ctlp/graphsim.hpp"
#include "ctlp/rng.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace ctlp;

namespace {

Matrix row_of(std::initializer_list<double> v) { return Matrix(1, v.size(), std::vector<double>(v)); }

// Builds a one-row ViewSet whose views are given directly.
ViewSet views(Matrix base, Matrix adj, Matrix gnn) {
  return ViewSet{"t", std::move(base), std::move(adj), std::move(gnn)};
}

ViewSet random_views(std::size_t n, std::uint64_t key, const GnnEnsemble& ens) {
  const Matrix x = synth::uniform_matrix(n, 6, key);
  return compute_views("t", x, build_knn_graph(x, 4), ens, {});
}

}  // namespace

TEST(CrossTaskSimilarity, AllViewsIdentical) {
  const ViewSet t = views(row_of({1, 2}), row_of({3, 1}), row_of({0, 5}));
  EXPECT_DOUBLE_EQ(cross_task_similarity(t, t, 0, 0), 1.0);
}

TEST(CrossTaskSimilarity, ArithmeticMeanOfViewCosines) {
  // Unit vectors at the angles whose cosines are 0.9, 0.6 and 0.3.
  auto unit = [](double c) { return row_of({c, std::sqrt(1.0 - c * c)}); };
  const ViewSet s = views(row_of({1, 0}), row_of({1, 0}), row_of({1, 0}));
  const ViewSet t = views(unit(0.9), unit(0.6), unit(0.3));
  EXPECT_NEAR(cross_task_similarity(t, s, 0, 0), 0.6, 1e-15);
}

TEST(CrossTaskSimilarity, EmbSimMaskIsPlainCosine) {
  const ViewSet s = views(row_of({1, 0}), row_of({1, 0}), row_of({1, 0}));
  const ViewSet t = views(row_of({1, 1}), row_of({0, 1}), row_of({0, 1}));
  EXPECT_EQ(cross_task_similarity(t, s, 0, 0, ViewMask::embsim()),
            cosine_similarity(t.base.row(0), s.base.row(0)));
}

TEST(CrossTaskSimilarity, ZeroRowContributesZero) {
  const ViewSet s = views(row_of({1, 0}), row_of({0, 0}), row_of({1, 0}));
  const ViewSet t = views(row_of({1, 0}), row_of({1, 0}), row_of({1, 0}));
  EXPECT_NEAR(cross_task_similarity(t, s, 0, 0), 2.0 / 3.0, 1e-15);
}

TEST(CrossTaskSimilarity, DimensionMismatchIsConfigError) {
  const ViewSet s = views(row_of({1, 0}), row_of({1, 0}), row_of({1, 0}));
  const ViewSet t = views(row_of({1, 0}), row_of({1, 0, 0}), row_of({1, 0}));
  EXPECT_THROW(cross_task_similarity(t, s, 0, 0), ConfigError);
  EXPECT_THROW(graphsim_scores(t, s), ConfigError);
  ViewSet missing = t;
  missing.adj_view = Matrix();
  EXPECT_THROW(graphsim_scores(missing, s), ConfigError);
  EXPECT_NO_THROW(graphsim_scores(missing, s, {true, false, true}));
}

TEST(GraphsimScores, MatchesPairwiseFunctionAndStaysInRange) {
  const std::vector<std::size_t> spec = {1, 2};
  const GnnEnsemble ens = init_gnn_ensemble(3, spec, 6, 8);
  const ViewSet t = random_views(12, 1, ens), s = random_views(30, 2, ens);
  const Matrix r = graphsim_scores(t, s);
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = 0; j < 30; ++j) {
      EXPECT_NEAR(r(i, j), cross_task_similarity(t, s, i, j), 1e-14);
      EXPECT_GE(r(i, j), -1.0);
      EXPECT_LE(r(i, j), 1.0);
    }
  }
  EXPECT_EQ(graphsim_scores(t, s, {}, 1), graphsim_scores(t, s, {}, 3));
}

TEST(GraphsimScores, ViewScaleDoesNotChangeSelection) {
  const std::vector<std::size_t> spec = {1, 2};
  const GnnEnsemble ens = init_gnn_ensemble(3, spec, 6, 8);
  const ViewSet t = random_views(10, 4, ens), s = random_views(40, 5, ens);
  const Dataset td = synth::make_dataset(DatasetRole::kTargetSeed, "t", "t", 10, 2, 1);
  const Dataset sd = synth::make_dataset(DatasetRole::kSource, "s", "s", 40, 2, 2);
  const auto before = select_source_examples(td, sd, graphsim_scores(t, s), 5);
  for (int view = 0; view < 3; ++view) {
    ViewSet scaled = s;
    Matrix& m = view == 0 ? scaled.base : view == 1 ? scaled.adj_view : scaled.gnn_view;
    for (auto& v : m.values()) v *= 4.0;  // a power of two keeps every cosine bit-identical
    const auto after = select_source_examples(td, sd, graphsim_scores(t, scaled), 5);
    for (std::size_t i = 0; i < 10; ++i) {
      for (std::size_t p = 0; p < 5; ++p) {
        EXPECT_EQ(after.entries[i].picks[p].source_id, before.entries[i].picks[p].source_id);
      }
    }
  }
}

TEST(RankTopK, SortOracleExample) {
  const std::vector<double> s = {0.2, 0.9, 0.5};
  EXPECT_EQ(rank_top_k(s, 2), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(rank_top_k(s, 10), (std::vector<std::size_t>{1, 2, 0}));
  const std::vector<double> tie = {0.4, 0.9, 0.9};
  EXPECT_EQ(rank_top_k(tie, 2), (std::vector<std::size_t>{1, 2}));
}

TEST(RankTopK, MatchesStableSortOracle) {
  for (std::uint64_t key = 0; key < 100; ++key) {
    CounterRng rng(key);
    const std::size_t n = 1 + rng.below(200), k = 1 + rng.below(n + 5);
    std::vector<double> s(n);
    // Coarse values so ties are frequent.
    for (auto& v : s) v = static_cast<double>(rng.below(20)) / 10.0 - 1.0;
    EXPECT_EQ(rank_top_k(s, k), oracle::top_k(s, k));
  }
}

TEST(SelectSourceExamples, ScoresAndIds) {
  const Dataset td = synth::make_dataset(DatasetRole::kTargetSeed, "t", "t", 1, 2, 1);
  const Dataset sd = synth::make_dataset(DatasetRole::kSource, "s", "s", 3, 2, 2);
  Matrix scores(1, 3, std::vector<double>{0.2, 0.9, 0.5});
  const auto sel = select_source_examples(td, sd, scores, 2);
  ASSERT_EQ(sel.entries.size(), 1u);
  const auto& picks = sel.entries[0].picks;
  ASSERT_EQ(picks.size(), 2u);
  EXPECT_EQ(picks[0].source_index, 1u);
  EXPECT_EQ(picks[0].source_id, "s-1");
  EXPECT_DOUBLE_EQ(picks[0].score, 0.9);
  EXPECT_EQ(picks[1].source_index, 2u);
  EXPECT_EQ(sel.find("t-0"), &sel.entries[0]);
  EXPECT_EQ(sel.find("nope"), nullptr);
}

TEST(SelectSourceExamples, Errors) {
  const Dataset td = synth::make_dataset(DatasetRole::kTargetSeed, "t", "t", 1, 2, 1);
  Dataset empty{DatasetRole::kSource, "s", "", {}};
  EXPECT_THROW(select_source_examples(td, empty, Matrix(1, 0), 1), ValidationError);
  const Dataset sd = synth::make_dataset(DatasetRole::kSource, "s", "s", 3, 2, 2);
  EXPECT_THROW(select_source_examples(td, sd, Matrix(1, 3), 0), ConfigError);
}

TEST(SelectSourceExamples, JsonlRoundTrip) {
  const Dataset td = synth::make_dataset(DatasetRole::kTargetSeed, "t", "t", 4, 2, 1);
  const Dataset sd = synth::make_dataset(DatasetRole::kSource, "s", "s", 9, 2, 2);
  const Matrix scores = synth::uniform_matrix(4, 9, 3);
  const auto sel = select_source_examples(td, sd, scores, 3);
  const std::string text = selection_to_jsonl(sel);
  const auto back = selection_from_jsonl(text, sd);
  ASSERT_EQ(back.entries.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(back.entries[i].target_id, sel.entries[i].target_id);
    for (std::size_t p = 0; p < 3; ++p) {
      EXPECT_EQ(back.entries[i].picks[p].source_index, sel.entries[i].picks[p].source_index);
      EXPECT_EQ(back.entries[i].picks[p].score, sel.entries[i].picks[p].score);
    }
  }
  EXPECT_EQ(selection_to_jsonl(back), text);
}

TEST(ModeReduction, BaseOnlyGraphSimEqualsEmbSim) {
  const Matrix target = synth::uniform_matrix(20, 8, 1);
  const Matrix source = synth::uniform_matrix(100, 8, 2);
  const ViewSet t{"t", target, {}, {}}, s{"s", source, {}, {}};
  EXPECT_EQ(graphsim_scores(t, s, ViewMask::embsim()), embsim_scores(target, source));
}
