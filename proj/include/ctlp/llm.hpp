#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctlp/config.hpp"
#include "ctlp/datamodel.hpp"
#include "ctlp/error.hpp"
#include "ctlp/graphsim.hpp"

namespace ctlp {

// ---------------------------------------------------------------------------
// Prompt assembly

struct PromptSpec {
  std::string task_definition;
};

struct Demo {
  const Example* example = nullptr;
  std::size_t label = 0;
};

char choice_letter(std::size_t index);

// "Question: {q}\nA. {C1}\n...\nAnswer:" plus " {letter}" when answered.
std::string render_question_block(const Example& example, std::optional<std::size_t> answer);

// Task definition, the demos in the given order, then the unanswered query,
// all separated by blank lines.
std::string build_prompt(const PromptSpec& spec, std::span<const Demo> demos, const Example& query);

// Reads `<prompts_dir>/<slug>.txt`, slug being the lower-cased task name with
// spaces and underscores turned into dashes.
std::string load_task_definition(const std::filesystem::path& prompts_dir,
                                 std::string_view task_name);

// ---------------------------------------------------------------------------
// Answer parsing

class UnparseableAnswer : public LlmError {
 public:
  explicit UnparseableAnswer(std::string raw)
      : LlmError("unparseable LLM answer: '" + raw + "'"), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

// First match wins: a leading answer letter on the first line ("B", "B.", "(B)"),
// then a case-insensitive whole-word choice-text match anywhere.
std::size_t parse_answer(std::string_view raw, std::span<const std::string> choices);

// ---------------------------------------------------------------------------
// Endpoints

class LlmEndpoint {
 public:
  virtual ~LlmEndpoint() = default;
  // Returns the completion text. Throws LlmError when the call cannot succeed.
  virtual std::string complete(const std::string& prompt) = 0;
};

/// OpenAI-style chat-completion client with bounded retries.
class HttpEndpoint : public LlmEndpoint {
 public:
  HttpEndpoint(LlmSettings settings, std::string run_id);
  std::string complete(const std::string& prompt) override;

  // The JSON body posted for `prompt`.
  std::string request_body(const std::string& prompt) const;

 private:
  void log_exchange(std::uint64_t request_id, int attempt, const std::string& request,
                    const std::string& response, int status);

  LlmSettings settings_;
  std::string run_id_;
  std::string scheme_host_port_;
  std::string path_;
  std::string token_;
  std::atomic<std::uint64_t> next_request_id_{0};
  std::mutex log_mutex_;
};

/// Sidecar entry for the mock: hidden cluster and (optionally) the answer.
struct MockFact {
  int cluster = -1;
  std::optional<std::size_t> label;
};

enum class MockPolicy { kClusterOracle, kGoldEcho, kConstant };

/// Deterministic stand-in LLM: a pure function of (prompt, seed).
/// kClusterOracle answers correctly iff at least one demonstration shares the
/// query's hidden cluster, otherwise a seeded random letter.
class MockLlm : public LlmEndpoint {
 public:
  MockLlm(MockPolicy policy, std::unordered_map<std::string, MockFact> facts, std::uint64_t seed,
          std::size_t constant_choice = 0);

  std::string complete(const std::string& prompt) override;

  // Sidecar JSONL: {"query": ..., "cluster": int, "label": int?} per line.
  static std::unordered_map<std::string, MockFact> load_sidecar(const std::filesystem::path& path);
  static std::unordered_map<std::string, MockFact> parse_sidecar(std::string_view jsonl);

 private:
  MockPolicy policy_;
  std::unordered_map<std::string, MockFact> facts_;
  std::uint64_t seed_;
  std::size_t constant_choice_;
};

// Parsed view of a rendered prompt; used by the mock and by tests.
struct ParsedBlock {
  std::string question;
  std::vector<std::string> choices;
  std::optional<std::size_t> answer;
};
std::vector<ParsedBlock> parse_prompt_blocks(std::string_view prompt);

/// Wraps an endpoint and counts calls.
class CountingEndpoint : public LlmEndpoint {
 public:
  explicit CountingEndpoint(LlmEndpoint& inner) : inner_(inner) {}
  std::string complete(const std::string& prompt) override {
    calls_.fetch_add(1);
    return inner_.complete(prompt);
  }
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  LlmEndpoint& inner_;
  std::atomic<std::size_t> calls_{0};
};

class FunctionEndpoint : public LlmEndpoint {
 public:
  explicit FunctionEndpoint(std::function<std::string(const std::string&)> fn) : fn_(std::move(fn)) {}
  std::string complete(const std::string& prompt) override { return fn_(prompt); }

 private:
  std::function<std::string(const std::string&)> fn_;
};

std::unique_ptr<LlmEndpoint> make_endpoint(const LlmSettings& settings, std::uint64_t seed,
                                           std::string run_id);

// ---------------------------------------------------------------------------
// Batched querying

struct QueryJob {
  std::string prompt;
  const Example* query = nullptr;
};

struct AnswerOutcome {
  std::vector<std::optional<std::size_t>> answers;  // input order
  std::vector<std::string> raw;
  std::vector<bool> completed;  // the endpoint returned a response
  std::size_t unparseable = 0;
  std::size_t issued = 0;
  std::optional<std::string> failure;  // set when the endpoint gave up
};

// Sends every prompt with at most `max_in_flight` concurrent requests. After
// an endpoint failure no new requests are issued; finished answers are kept.
AnswerOutcome ask_all(LlmEndpoint& endpoint, std::span<const QueryJob> jobs,
                      std::size_t max_in_flight);

class LabelingAborted : public LlmError {
 public:
  LabelingAborted(const std::string& message, PseudoLabeledSet partial)
      : LlmError(message), partial_(std::move(partial)) {}
  const PseudoLabeledSet& partial() const noexcept { return partial_; }

 private:
  PseudoLabeledSet partial_;
};

struct SeedLabelOutcome {
  PseudoLabeledSet labels;
  std::vector<std::string> dropped;  // ids whose answer could not be parsed
  std::size_t llm_calls = 0;
};

// Labels each seed example from its top-K selected source demonstrations.
// Demonstrations appear in ascending score order, best one next to the query.
SeedLabelOutcome pseudo_label_seed(const Dataset& seed, const SelectionResult& selection,
                                   const Dataset& source, const PromptSpec& spec,
                                   LlmEndpoint& endpoint, std::size_t k,
                                   std::size_t max_in_flight = 4);

}  // namespace ctlp
