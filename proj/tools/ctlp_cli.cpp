// Command-line front end: runs one pipeline stage, or every stage, for a mode.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ctlp/config.hpp"
#include "ctlp/error.hpp"
#include "ctlp/pipeline.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  std::string mode;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool dump_graphs = false;
  bool dump_selections = false;
  std::string log_level = "info";
  bool json_report = false;
};

int run(const std::string& command, const CliArgs& args) {
  ctlp::RunConfig config = ctlp::load_config(args.config_path);
  if (!args.mode.empty()) config.mode = ctlp::parse_mode(args.mode);
  if (args.seed) config.seed = *args.seed;
  ctlp::validate(config);

  const ctlp::PipelineInputs inputs = ctlp::load_inputs(config);
  const ctlp::RunOptions options{args.out_dir, args.dump_graphs, args.dump_selections};
  const std::string run_id = std::string(ctlp::to_string(config.mode)) + "-" + std::to_string(config.seed);
  auto endpoint = ctlp::make_endpoint(config.llm, config.seed, run_id);

  if (command == "all") {
    const ctlp::RunOutput out = ctlp::run_mode(config, inputs, *endpoint, options);
    if (args.json_report) {
      std::cout << out.report.to_json().dump(2) << '\n';
    } else {
      std::cout << out.report.to_table();
    }
    return 0;
  }

  static const std::pair<const char*, ctlp::Stage> stages[] = {
      {"select", ctlp::Stage::kSelect},     {"label-seed", ctlp::Stage::kLabelSeed},
      {"propagate", ctlp::Stage::kPropagate}, {"run-icl", ctlp::Stage::kRunIcl},
      {"eval", ctlp::Stage::kEval}};
  for (const auto& [name, stage] : stages) {
    if (command == name) {
      ctlp::run_stage(stage, config, inputs, endpoint.get(), options);
      return 0;
    }
  }
  throw ctlp::ConfigError("unknown command " + command);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-task pseudo-labeling pipeline"};
  app.require_subcommand(1);

  CliArgs args;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--mode", args.mode, "override the configured mode");
    sub->add_option("--seed", args.seed, "override the configured RNG seed");
    sub->add_option("--out", args.out_dir, "directory for stage artifacts");
    sub->add_flag("--dump-graphs", args.dump_graphs, "write kNN graphs as JSONL");
    sub->add_flag("--dump-selections", args.dump_selections, "write test-time selections");
    sub->add_option("--log-level", args.log_level, "trace, debug, info, warn, error or off");
  };

  const std::pair<const char*, const char*> commands[] = {
      {"select", "split the pool and select source demonstrations"},
      {"label-seed", "pseudo-label the seed split with the LLM"},
      {"propagate", "train GLIP and propagate labels to the unlabeled split"},
      {"run-icl", "answer the test split by in-context learning"},
      {"eval", "score stored predictions against gold"},
      {"all", "run every stage of the configured mode"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub);
    if (std::string(name) == "all") sub->add_flag("--json", args.json_report, "print the report as JSON");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  auto logger = spdlog::stderr_color_mt("ctlp");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(args.log_level));

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, args);
  } catch (const ctlp::Error& e) {
    spdlog::error("{} error: {}", ctlp::to_string(e.category()), e.what());
    return ctlp::exit_code(e.category());
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return 1;
  }
}
