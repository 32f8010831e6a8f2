#include "ctlp/llm.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>
#include <json.hpp>

#include "ctlp/rng.hpp"

namespace ctlp {

using nlohmann::json;

char choice_letter(std::size_t index) {
  if (index >= kMaxChoices) throw ValidationError("choice index out of letter range");
  return static_cast<char>('A' + index);
}

std::string render_question_block(const Example& example, std::optional<std::size_t> answer) {
  std::string out = "Question: " + example.query + "\n";
  for (std::size_t i = 0; i < example.choices.size(); ++i) {
    out += choice_letter(i);
    out += ". ";
    out += example.choices[i];
    out += '\n';
  }
  out += "Answer:";
  if (answer) {
    if (*answer >= example.choices.size()) {
      throw ValidationError("demo label out of range for '" + example.id + "'");
    }
    out += ' ';
    out += choice_letter(*answer);
  }
  return out;
}

std::string build_prompt(const PromptSpec& spec, std::span<const Demo> demos, const Example& query) {
  std::string out = spec.task_definition;
  for (const auto& demo : demos) {
    if (!out.empty()) out += "\n\n";
    out += render_question_block(*demo.example, demo.label);
  }
  if (!out.empty()) out += "\n\n";
  out += render_question_block(query, std::nullopt);
  return out;
}

std::string load_task_definition(const std::filesystem::path& prompts_dir,
                                 std::string_view task_name) {
  std::string slug;
  for (char c : task_name) {
    if (c == ' ' || c == '_') {
      slug += '-';
    } else {
      slug += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  std::string text = read_file(prompts_dir / (slug + ".txt"));
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
  return text;
}

// ---------------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::optional<std::size_t> leading_letter(std::string_view line, std::size_t n_choices) {
  line = trim(line);
  if (line.size() >= 7 && lower(line.substr(0, 7)) == "answer:") line = trim(line.substr(7));
  bool paren = false;
  if (!line.empty() && line.front() == '(') {
    paren = true;
    line.remove_prefix(1);
  }
  if (line.empty() || line.front() < 'A' || line.front() > 'Z') return std::nullopt;
  const std::size_t index = static_cast<std::size_t>(line.front() - 'A');
  line.remove_prefix(1);
  if (paren) {
    if (line.empty() || line.front() != ')') return std::nullopt;
    line.remove_prefix(1);
  }
  const bool boundary =
      line.empty() || line.front() == '.' || line.front() == ')' || line.front() == ':' ||
      line.front() == ',' || (paren && std::isspace(static_cast<unsigned char>(line.front())));
  if (!boundary || index >= n_choices) return std::nullopt;
  return index;
}

}  // namespace

std::size_t parse_answer(std::string_view raw, std::span<const std::string> choices) {
  std::string_view body = trim(raw);
  const auto first_line = body.substr(0, body.find('\n'));
  if (auto idx = leading_letter(first_line, choices.size())) return *idx;

  const std::string haystack = lower(raw);
  std::optional<std::size_t> best;
  std::size_t best_pos = std::string::npos;
  std::size_t best_len = 0;
  for (std::size_t c = 0; c < choices.size(); ++c) {
    const std::string needle = lower(trim(choices[c]));
    if (needle.empty()) continue;
    for (auto pos = haystack.find(needle); pos != std::string::npos;
         pos = haystack.find(needle, pos + 1)) {
      const bool left_ok = pos == 0 || !is_word_char(haystack[pos - 1]);
      const std::size_t end = pos + needle.size();
      const bool right_ok = end == haystack.size() || !is_word_char(haystack[end]);
      if (!left_ok || !right_ok) continue;
      if (pos < best_pos || (pos == best_pos && needle.size() > best_len)) {
        best = c;
        best_pos = pos;
        best_len = needle.size();
      }
      break;
    }
  }
  if (best) return *best;
  throw UnparseableAnswer(std::string(raw));
}

// ---------------------------------------------------------------------------

std::vector<ParsedBlock> parse_prompt_blocks(std::string_view prompt) {
  std::vector<ParsedBlock> out;
  std::size_t pos = 0;
  while (pos <= prompt.size()) {
    std::size_t end = prompt.find("\n\n", pos);
    if (end == std::string_view::npos) end = prompt.size();
    const std::string_view block = prompt.substr(pos, end - pos);
    pos = end + 2;

    if (!block.starts_with("Question: ")) continue;
    std::vector<std::string_view> lines;
    for (std::size_t p = 0; p <= block.size();) {
      std::size_t e = block.find('\n', p);
      if (e == std::string_view::npos) e = block.size();
      lines.push_back(block.substr(p, e - p));
      p = e + 1;
    }
    if (lines.size() < 2 || !lines.back().starts_with("Answer:")) continue;
    const std::size_t answer_line = lines.size() - 1;

    // The choice list is the first run of "A. ", "B. ", ... ending right before Answer:.
    for (std::size_t start = 1; start < answer_line; ++start) {
      bool ok = true;
      for (std::size_t i = start; i < answer_line && ok; ++i) {
        const std::size_t letter = i - start;
        ok = letter < kMaxChoices && lines[i].size() >= 3 &&
             lines[i][0] == static_cast<char>('A' + letter) && lines[i][1] == '.' &&
             lines[i][2] == ' ';
      }
      if (!ok) continue;
      ParsedBlock parsed;
      std::string question(block.substr(10, lines[start].data() - block.data() - 11));
      parsed.question = std::move(question);
      for (std::size_t i = start; i < answer_line; ++i) parsed.choices.emplace_back(lines[i].substr(3));
      const auto ans = trim(lines.back().substr(7));
      if (ans.size() == 1 && ans[0] >= 'A' && ans[0] <= 'Z') {
        parsed.answer = static_cast<std::size_t>(ans[0] - 'A');
      }
      out.push_back(std::move(parsed));
      break;
    }
  }
  return out;
}

MockLlm::MockLlm(MockPolicy policy, std::unordered_map<std::string, MockFact> facts,
                 std::uint64_t seed, std::size_t constant_choice)
    : policy_(policy), facts_(std::move(facts)), seed_(seed), constant_choice_(constant_choice) {}

std::string MockLlm::complete(const std::string& prompt) {
  const auto blocks = parse_prompt_blocks(prompt);
  if (blocks.empty() || blocks.back().answer) {
    throw LlmError("mock LLM: prompt has no unanswered query block");
  }
  const ParsedBlock& query = blocks.back();
  const std::size_t n = query.choices.size();

  if (policy_ == MockPolicy::kConstant) {
    return std::string(1, choice_letter(std::min(constant_choice_, n - 1)));
  }

  auto it = facts_.find(query.question);
  if (it == facts_.end() || !it->second.label) {
    throw LlmError("mock LLM: no sidecar answer for query '" + query.question + "'");
  }
  const std::size_t gold = *it->second.label;
  bool correct = policy_ == MockPolicy::kGoldEcho;
  if (policy_ == MockPolicy::kClusterOracle) {
    for (std::size_t b = 0; b + 1 < blocks.size() && !correct; ++b) {
      auto demo = facts_.find(blocks[b].question);
      correct = demo != facts_.end() && demo->second.cluster == it->second.cluster;
    }
  }
  if (correct) return std::string(1, choice_letter(gold)) + ".";

  CounterRng rng(derive_key(seed_, std::string_view(prompt)));
  return std::string(1, choice_letter(static_cast<std::size_t>(rng.below(n)))) + ".";
}

std::unordered_map<std::string, MockFact> MockLlm::parse_sidecar(std::string_view jsonl) {
  std::unordered_map<std::string, MockFact> out;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto obj = json::parse(line);
      MockFact fact;
      fact.cluster = obj.at("cluster").get<int>();
      if (auto l = obj.find("label"); l != obj.end() && !l->is_null()) fact.label = l->get<std::size_t>();
      out.insert_or_assign(obj.at("query").get<std::string>(), fact);
    } catch (const json::exception& e) {
      throw DatasetParseError(line_no, std::string("bad mock sidecar entry: ") + e.what());
    }
  }
  return out;
}

std::unordered_map<std::string, MockFact> MockLlm::load_sidecar(const std::filesystem::path& path) {
  return parse_sidecar(read_file(path));
}

// ---------------------------------------------------------------------------

HttpEndpoint::HttpEndpoint(LlmSettings settings, std::string run_id)
    : settings_(std::move(settings)), run_id_(std::move(run_id)) {
  const auto& url = settings_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("llm.base_url needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  std::string base_path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!base_path.empty() && base_path.back() == '/') base_path.pop_back();
  path_ = base_path.ends_with("/chat/completions") ? base_path : base_path + "/chat/completions";

  if (!settings_.token_env.empty()) {
    const char* token = std::getenv(settings_.token_env.c_str());
    if (!token) throw ConfigError("environment variable " + settings_.token_env + " is not set");
    token_ = token;
  }
}

std::string HttpEndpoint::request_body(const std::string& prompt) const {
  const json body = {
      {"model", settings_.model_name},
      {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", settings_.temperature},
      {"max_tokens", settings_.max_tokens},
  };
  return body.dump();
}

void HttpEndpoint::log_exchange(std::uint64_t request_id, int attempt, const std::string& request,
                                const std::string& response, int status) {
  if (settings_.log_path.empty()) return;
  const json entry = {{"run_id", run_id_},   {"request_id", request_id}, {"attempt", attempt},
                      {"status", status},    {"request", request},       {"response", response}};
  std::lock_guard lock(log_mutex_);
  std::ofstream out(settings_.log_path, std::ios::app);
  out << entry.dump() << '\n';
}

std::string HttpEndpoint::complete(const std::string& prompt) {
  const std::uint64_t request_id = next_request_id_.fetch_add(1);
  const std::string body = request_body(prompt);
  CounterRng jitter(derive_key(request_id, std::string_view(run_id_)));

  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

  std::string last_error;
  for (std::size_t attempt = 0; attempt < settings_.max_attempts; ++attempt) {
    if (attempt > 0) {
      const double delay = settings_.backoff_initial_ms * static_cast<double>(1ULL << (attempt - 1)) *
                           (0.5 + jitter.next_unit());
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay));
    }

    httplib::Client client(scheme_host_port_);
    const auto timeout = std::chrono::duration<double>(settings_.timeout_s);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    auto res = client.Post(path_, headers, body, "application/json");

    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      log_exchange(request_id, static_cast<int>(attempt), body, last_error, 0);
      spdlog::warn("llm request {} attempt {} failed: {}", request_id, attempt + 1, last_error);
      continue;
    }
    log_exchange(request_id, static_cast<int>(attempt), body, res->body, res->status);
    if (res->status == 200) {
      try {
        const auto reply = json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const json::exception& e) {
        throw LlmError(std::string("malformed chat completion response: ") + e.what());
      }
    }
    last_error = "HTTP " + std::to_string(res->status);
    if (res->status != 429 && res->status < 500) {
      throw LlmError("llm request rejected with " + last_error + ": " + res->body);
    }
    spdlog::warn("llm request {} attempt {} got {}", request_id, attempt + 1, last_error);
  }
  throw LlmError("llm endpoint unreachable after " + std::to_string(settings_.max_attempts) +
                 " attempts (" + last_error + ")");
}

std::unique_ptr<LlmEndpoint> make_endpoint(const LlmSettings& settings, std::uint64_t seed,
                                           std::string run_id) {
  if (settings.kind == "http") return std::make_unique<HttpEndpoint>(settings, std::move(run_id));
  if (settings.kind != "mock") throw ConfigError("unknown llm.kind '" + settings.kind + "'");

  MockPolicy policy = MockPolicy::kClusterOracle;
  if (settings.mock_policy == "gold") policy = MockPolicy::kGoldEcho;
  if (settings.mock_policy == "constant") policy = MockPolicy::kConstant;
  std::unordered_map<std::string, MockFact> facts;
  if (policy != MockPolicy::kConstant) {
    if (settings.mock_sidecar.empty()) throw ConfigError("mock LLM needs llm.mock_sidecar");
    facts = MockLlm::load_sidecar(settings.mock_sidecar);
  }
  return std::make_unique<MockLlm>(policy, std::move(facts), derive_key(seed, "mock_llm"),
                                   settings.mock_constant_choice);
}

// ---------------------------------------------------------------------------

AnswerOutcome ask_all(LlmEndpoint& endpoint, std::span<const QueryJob> jobs,
                      std::size_t max_in_flight) {
  AnswerOutcome out;
  out.answers.assign(jobs.size(), std::nullopt);
  out.raw.assign(jobs.size(), {});
  std::vector<char> done(jobs.size(), 0);  // vector<bool> is not safe for concurrent writes

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::atomic<std::size_t> issued{0};
  std::mutex failure_mutex;

  auto worker = [&] {
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      issued.fetch_add(1);
      try {
        out.raw[i] = endpoint.complete(jobs[i].prompt);
      } catch (const Error& e) {
        std::lock_guard lock(failure_mutex);
        if (!out.failure) out.failure = e.what();
        stop.store(true);
        return;
      }
      done[i] = 1;
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(max_in_flight, jobs.size()));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!done[i]) continue;
    try {
      out.answers[i] = parse_answer(out.raw[i], jobs[i].query->choices);
    } catch (const UnparseableAnswer&) {
      ++out.unparseable;
    }
  }
  out.completed.assign(done.begin(), done.end());
  out.issued = issued.load();
  return out;
}

SeedLabelOutcome pseudo_label_seed(const Dataset& seed, const SelectionResult& selection,
                                   const Dataset& source, const PromptSpec& spec,
                                   LlmEndpoint& endpoint, std::size_t k,
                                   std::size_t max_in_flight) {
  std::vector<QueryJob> jobs;
  jobs.reserve(seed.size());
  for (const auto& ex : seed.examples) {
    const auto* entry = selection.find(ex.id);
    if (!entry) throw ValidationError("selection does not cover seed example '" + ex.id + "'");
    const std::size_t take = std::min(k, entry->picks.size());
    std::vector<Demo> demos;
    for (std::size_t r = take; r-- > 0;) {
      const auto& pick = entry->picks[r];
      const Example& demo = source.examples.at(pick.source_index);
      if (!demo.gold_label) throw ValidationError("source example '" + demo.id + "' lacks a label");
      demos.push_back({&demo, *demo.gold_label});
    }
    jobs.push_back({build_prompt(spec, demos, ex), &ex});
  }

  const AnswerOutcome answers = ask_all(endpoint, jobs, max_in_flight);
  SeedLabelOutcome out;
  out.llm_calls = answers.issued;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& ex = seed.examples[i];
    if (answers.answers[i]) {
      out.labels.set(ex.id, {*answers.answers[i], Provenance::kLlmSeed, 1.0});
    } else if (answers.completed[i]) {
      out.dropped.push_back(ex.id);
    }
  }
  if (answers.failure) {
    throw LabelingAborted("seed labeling aborted: " + *answers.failure, out.labels);
  }
  if (!out.dropped.empty()) {
    spdlog::warn("dropped {} of {} seed examples with unparseable answers", out.dropped.size(),
                 seed.size());
  }
  return out;
}

}  // namespace ctlp
