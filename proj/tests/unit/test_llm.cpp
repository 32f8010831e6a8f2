#include <atomic>
#include <chrono>
#include <thread>

#include <gtest/gtest.h>

#include "ctlp/llm.hpp"
#include "ctlp/rng.hpp"
#include "synthetic.hpp"

using namespace ctlp;

namespace {

Example ex(std::string id, std::string q, std::vector<std::string> choices,
           std::optional<std::size_t> gold = std::nullopt) {
  return Example{std::move(id), std::move(q), std::move(choices), gold};
}

const std::vector<std::string> kFour = {"ice", "steam", "water", "snow"};

}  // namespace

TEST(BuildPrompt, ZeroShotIsDefinitionAndQuery) {
  const Example q = ex("q", "What is frozen water?", {"ice", "steam"});
  EXPECT_EQ(build_prompt({"Answer the question."}, {}, q),
            "Answer the question.\n\nQuestion: What is frozen water?\nA. ice\nB. steam\nAnswer:");
}

TEST(BuildPrompt, DemoLabelBecomesLetter) {
  const Example d = ex("d", "Is the sky blue?", {"no", "yes"});
  const Example q = ex("q", "Is grass green?", {"no", "yes"});
  const std::vector<Demo> demos = {{&d, 1}};
  const std::string p = build_prompt({"Def."}, demos, q);
  EXPECT_EQ(p,
            "Def.\n\nQuestion: Is the sky blue?\nA. no\nB. yes\nAnswer: B\n\n"
            "Question: Is grass green?\nA. no\nB. yes\nAnswer:");
}

TEST(BuildPrompt, DemoOrderMattersAndIsDeterministic) {
  const Example d1 = ex("1", "one", {"a", "b"}), d2 = ex("2", "two", {"a", "b"});
  const Example q = ex("q", "three", {"a", "b"});
  const std::vector<Demo> fwd = {{&d1, 0}, {&d2, 1}}, rev = {{&d2, 1}, {&d1, 0}};
  const std::string a = build_prompt({"D"}, fwd, q), b = build_prompt({"D"}, rev, q);
  EXPECT_NE(a, b);
  EXPECT_EQ(a.size(), b.size());
  EXPECT_EQ(a, build_prompt({"D"}, fwd, q));
  const auto blocks_a = parse_prompt_blocks(a), blocks_b = parse_prompt_blocks(b);
  ASSERT_EQ(blocks_a.size(), 3u);
  EXPECT_EQ(blocks_a[0].question, blocks_b[1].question);
  EXPECT_EQ(blocks_a[1].question, blocks_b[0].question);
}

TEST(BuildPrompt, TwentySixChoicesUseLettersAToZ) {
  std::vector<std::string> choices;
  for (int i = 0; i < 26; ++i) choices.push_back("c" + std::to_string(i));
  const std::string block = render_question_block(ex("q", "Q", choices), 25);
  EXPECT_NE(block.find("\nZ. c25\n"), std::string::npos);
  EXPECT_TRUE(block.ends_with("Answer: Z"));
}

TEST(ParseAnswer, SpecExamples) {
  EXPECT_EQ(parse_answer("B. Because water expands", kFour), 1u);
  const std::vector<std::string> sentiment = {"positive", "neutral", "negative"};
  EXPECT_EQ(parse_answer("the answer is positive", sentiment), 0u);
  EXPECT_THROW(parse_answer("I am not sure.", sentiment), UnparseableAnswer);
}

TEST(ParseAnswer, LetterForms) {
  for (const char* raw : {"B", "B.", "(B)", "B)", "B:", " B\n", "Answer: B", "answer: (B) steam", "B, steam"}) {
    EXPECT_EQ(parse_answer(raw, kFour), 1u) << raw;
  }
}

TEST(ParseAnswer, LetterOutOfRangeFallsThroughToText) {
  EXPECT_EQ(parse_answer("E. it is snow", kFour), 3u);
  EXPECT_THROW(parse_answer("E.", kFour), UnparseableAnswer);
}

TEST(ParseAnswer, BareWordStartingWithCapitalIsNotALetter) {
  // "A steam engine" starts with the article "A", not choice A.
  EXPECT_EQ(parse_answer("A steam engine", kFour), 1u);
}

TEST(ParseAnswer, LetterOnlyCountsOnFirstLine) {
  EXPECT_EQ(parse_answer("hmm\nB. ice", kFour), 0u);
  EXPECT_THROW(parse_answer("hmm\nB.", kFour), UnparseableAnswer);
}

TEST(ParseAnswer, TextMatchIsWholeWordAndEarliest) {
  const std::vector<std::string> c = {"snow", "now"};
  EXPECT_EQ(parse_answer("it is snowing now", c), 1u);
  EXPECT_EQ(parse_answer("NOW or SNOW", c), 1u);
  EXPECT_EQ(parse_answer("snow, now", c), 0u);
  const std::vector<std::string> nested = {"new york", "new york city"};
  EXPECT_EQ(parse_answer("I pick new york city.", nested), 1u);
}

TEST(ParseAnswer, UnparseableCarriesRawText) {
  try {
    parse_answer("no idea", kFour);
    FAIL();
  } catch (const UnparseableAnswer& e) {
    EXPECT_EQ(e.raw(), "no idea");
    EXPECT_EQ(e.category(), ErrorCategory::kLlm);
  }
}

TEST(ParseAnswer, RoundTripsEveryRenderedLetter) {
  for (std::size_t n = 1; n <= 26; ++n) {
    std::vector<std::string> choices;
    for (std::size_t i = 0; i < n; ++i) choices.push_back("choice text " + std::to_string(i));
    const Example e = ex("e", "q", choices);
    for (std::size_t i = 0; i < n; ++i) {
      const std::string block = render_question_block(e, i);
      const std::string answer = block.substr(block.rfind("Answer: ") + 8);
      EXPECT_EQ(parse_answer(answer, choices), i);
    }
  }
}

TEST(PromptBlocks, ParsesWhatBuildPromptRenders) {
  const Example d = ex("d", "Line one\nline two", {"x", "y", "z"});
  const Example q = ex("q", "Query?", {"p", "q"});
  const std::vector<Demo> demos = {{&d, 2}};
  const auto blocks = parse_prompt_blocks(build_prompt({"Task text.\n\nWith a blank line."}, demos, q));
  ASSERT_EQ(blocks.size(), 2u);
  EXPECT_EQ(blocks[0].question, "Line one\nline two");
  EXPECT_EQ(blocks[0].choices, (std::vector<std::string>{"x", "y", "z"}));
  EXPECT_EQ(blocks[0].answer, 2u);
  EXPECT_EQ(blocks[1].question, "Query?");
  EXPECT_FALSE(blocks[1].answer.has_value());
}

TEST(TaskDefinition, SlugLookup) {
  const auto dir = synth::fresh_temp_dir("llm-prompts");
  write_file(dir / "arc-easy.txt", "Given a question answering task...\n");
  EXPECT_EQ(load_task_definition(dir, "ARC Easy"), "Given a question answering task...");
  EXPECT_EQ(load_task_definition(dir, "arc_easy"), "Given a question answering task...");
  EXPECT_THROW(load_task_definition(dir, "boolq"), IoError);
}

TEST(TaskDefinition, ShippedAssetsExist) {
  const std::filesystem::path dir = CTLP_SOURCE_DIR "/assets/prompts";
  for (const char* task : {"ARC-Easy", "AG-News", "BoolQ", "Commonsense-QA", "QQP", "RACE", "SST2",
                           "ARC-Challenge", "Financial-Phrasebank", "MedMCQA", "SciQ", "Social-i-QA"}) {
    EXPECT_FALSE(load_task_definition(dir, task).empty()) << task;
  }
}

// ---------------------------------------------------------------------------

namespace {

struct MockWorld {
  Example s0 = ex("s0", "source in cluster 0", {"a", "b"}, 0);
  Example s1 = ex("s1", "source in cluster 1", {"a", "b"}, 1);
  Example t = ex("t", "target in cluster 1", {"w", "x", "y", "z"}, 2);
  std::unordered_map<std::string, MockFact> facts = {
      {s0.query, {0, 0}}, {s1.query, {1, 1}}, {t.query, {1, 2}}};
};

}  // namespace

TEST(MockLlm, ClusterOracleAnswersCorrectlyWithSameClusterDemo) {
  MockWorld w;
  MockLlm mock(MockPolicy::kClusterOracle, w.facts, 3);
  const std::vector<Demo> good = {{&w.s0, 0}, {&w.s1, 1}};
  EXPECT_EQ(parse_answer(mock.complete(build_prompt({"D"}, good, w.t)), w.t.choices), 2u);
}

TEST(MockLlm, ClusterOracleOtherwiseAnswersSeededRandomLetter) {
  MockWorld w;
  const std::vector<Demo> bad = {{&w.s0, 0}};
  const std::string prompt = build_prompt({"D"}, bad, w.t);
  MockLlm a(MockPolicy::kClusterOracle, w.facts, 3), b(MockPolicy::kClusterOracle, w.facts, 3);
  const std::string answer = a.complete(prompt);
  EXPECT_EQ(answer, b.complete(prompt));
  EXPECT_EQ(answer, a.complete(prompt));
  EXPECT_LT(parse_answer(answer, w.t.choices), 4u);

  // Across many seeds the fallback covers every letter.
  std::set<std::string> seen;
  for (std::uint64_t s = 0; s < 200; ++s) seen.insert(MockLlm(MockPolicy::kClusterOracle, w.facts, s).complete(prompt));
  EXPECT_EQ(seen.size(), 4u);
}

TEST(MockLlm, GoldEchoConstantAndUnknownQuery) {
  MockWorld w;
  EXPECT_EQ(MockLlm(MockPolicy::kGoldEcho, w.facts, 0).complete(build_prompt({"D"}, {}, w.t)), "C.");
  EXPECT_EQ(MockLlm(MockPolicy::kConstant, {}, 0).complete(build_prompt({"D"}, {}, w.t)), "A");
  const Example stranger = ex("x", "never seen", {"a", "b"});
  EXPECT_THROW(MockLlm(MockPolicy::kGoldEcho, w.facts, 0).complete(build_prompt({"D"}, {}, stranger)),
               LlmError);
}

TEST(MockLlm, SidecarParsing) {
  const auto facts = MockLlm::parse_sidecar(
      "{\"query\":\"q1\",\"cluster\":3,\"label\":1}\n\n{\"query\":\"q2\",\"cluster\":0}\n");
  ASSERT_EQ(facts.size(), 2u);
  EXPECT_EQ(facts.at("q1").cluster, 3);
  EXPECT_EQ(facts.at("q1").label, 1u);
  EXPECT_FALSE(facts.at("q2").label.has_value());
  EXPECT_THROW(MockLlm::parse_sidecar("{\"query\":\"q1\"}\n"), ParseError);
}

TEST(MakeEndpoint, RejectsIncompleteMockSettings) {
  LlmSettings s;
  s.mock_policy = "cluster";
  EXPECT_THROW(make_endpoint(s, 0, "run"), ConfigError);
  s.mock_policy = "constant";
  EXPECT_NO_THROW(make_endpoint(s, 0, "run"));
  s.kind = "carrier-pigeon";
  EXPECT_THROW(make_endpoint(s, 0, "run"), ConfigError);
}

// ---------------------------------------------------------------------------

TEST(AskAll, KeepsInputOrderUnderConcurrency) {
  std::vector<Example> queries;
  for (int i = 0; i < 40; ++i) queries.push_back(ex("e" + std::to_string(i), "q" + std::to_string(i), {"a", "b", "c"}));
  std::atomic<int> in_flight{0}, peak{0};
  FunctionEndpoint endpoint([&](const std::string& prompt) {
    const int now = ++in_flight;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
    --in_flight;
    const auto blocks = parse_prompt_blocks(prompt);
    const int i = std::stoi(blocks.back().question.substr(1));
    return std::string(1, choice_letter(static_cast<std::size_t>(i % 3)));
  });
  std::vector<QueryJob> jobs;
  for (const auto& q : queries) jobs.push_back({build_prompt({}, {}, q), &q});
  const AnswerOutcome out = ask_all(endpoint, jobs, 4);
  EXPECT_EQ(out.issued, 40u);
  EXPECT_LE(peak.load(), 4);
  for (int i = 0; i < 40; ++i) EXPECT_EQ(out.answers[i], static_cast<std::size_t>(i % 3));
  EXPECT_FALSE(out.failure.has_value());
}

TEST(AskAll, StopsIssuingAfterFailure) {
  std::vector<Example> queries;
  for (int i = 0; i < 30; ++i) queries.push_back(ex("e" + std::to_string(i), "q" + std::to_string(i), {"a", "b"}));
  std::atomic<int> calls{0};
  FunctionEndpoint endpoint([&](const std::string&) -> std::string {
    if (++calls == 5) throw LlmError("endpoint down");
    return "A";
  });
  std::vector<QueryJob> jobs;
  for (const auto& q : queries) jobs.push_back({build_prompt({}, {}, q), &q});
  const AnswerOutcome out = ask_all(endpoint, jobs, 1);
  ASSERT_TRUE(out.failure.has_value());
  EXPECT_EQ(out.issued, 5u);
  EXPECT_EQ(std::count(out.completed.begin(), out.completed.end(), true), 4);
}

namespace {

struct SeedWorld {
  Dataset source = synth::make_dataset(DatasetRole::kSource, "s", "src", 5, 2, 1);
  Dataset seed = synth::make_dataset(DatasetRole::kTargetSeed, "t", "seed", 100, 4, 2, false);
  SelectionResult selection;

  SeedWorld() {
    Matrix scores = synth::uniform_matrix(seed.size(), source.size(), 3);
    selection = select_source_examples(seed, source, scores, 2);
  }
};

}  // namespace

TEST(PseudoLabelSeed, ConstantMockLabelsEverythingZero) {
  SeedWorld w;
  MockLlm mock(MockPolicy::kConstant, {}, 0);
  const auto out = pseudo_label_seed(w.seed, w.selection, w.source, {"D"}, mock, 1);
  EXPECT_EQ(out.labels.size(), 100u);
  EXPECT_EQ(out.llm_calls, 100u);
  for (const auto& [id, l] : out.labels.entries()) {
    EXPECT_EQ(l.choice, 0u);
    EXPECT_EQ(l.provenance, Provenance::kLlmSeed);
  }
}

TEST(PseudoLabelSeed, UnparseableAnswersAreDropped) {
  SeedWorld w;
  const std::set<std::string> garbled = {"seed question 7", "seed question 42", "seed question 99"};
  FunctionEndpoint endpoint([&](const std::string& prompt) {
    const auto q = parse_prompt_blocks(prompt).back().question;
    return garbled.contains(q) ? std::string("no idea") : std::string("B");
  });
  const auto out = pseudo_label_seed(w.seed, w.selection, w.source, {"D"}, endpoint, 1);
  EXPECT_EQ(out.labels.size(), 97u);
  EXPECT_EQ(out.dropped, (std::vector<std::string>{"seed-7", "seed-42", "seed-99"}));
  EXPECT_EQ(out.llm_calls, 100u);
}

TEST(PseudoLabelSeed, DemosAscendWithGoldLabels) {
  SeedWorld w;
  std::vector<std::string> prompts;
  std::mutex m;
  FunctionEndpoint endpoint([&](const std::string& prompt) {
    std::lock_guard lock(m);
    prompts.push_back(prompt);
    return std::string("A");
  });
  Dataset one = w.seed;
  one.examples.resize(1);
  pseudo_label_seed(one, w.selection, w.source, {"D"}, endpoint, 2);
  ASSERT_EQ(prompts.size(), 1u);
  const auto blocks = parse_prompt_blocks(prompts[0]);
  ASSERT_EQ(blocks.size(), 3u);
  const auto& picks = w.selection.entries[0].picks;
  EXPECT_EQ(blocks[0].question, w.source.examples[picks[1].source_index].query);
  EXPECT_EQ(blocks[1].question, w.source.examples[picks[0].source_index].query);
  EXPECT_EQ(blocks[1].answer, w.source.examples[picks[0].source_index].gold_label);
}

TEST(PseudoLabelSeed, EndpointFailureAbortsWithPartialLabels) {
  SeedWorld w;
  std::atomic<int> calls{0};
  FunctionEndpoint endpoint([&](const std::string&) -> std::string {
    if (++calls > 10) throw LlmError("gave up after retries");
    return "A";
  });
  try {
    pseudo_label_seed(w.seed, w.selection, w.source, {"D"}, endpoint, 1, 1);
    FAIL();
  } catch (const LabelingAborted& e) {
    EXPECT_EQ(e.partial().size(), 10u);
  }
}
