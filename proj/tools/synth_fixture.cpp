// Writes a synthetic clustered source/target task pair, with a mock LLM
// sidecar and a ready-to-run config, for trying the CLI without real data.
#include <iostream>

#include <CLI11.hpp>

#include "ctlp/error.hpp"
#include "synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic fixture for the pipeline CLI"};
  std::string out;
  ctlp::synth::ClusterFixtureParams p;
  app.add_option("--out", out, "output directory")->required();
  app.add_option("--clusters", p.clusters, "latent clusters shared by both tasks");
  app.add_option("--source-per-cluster", p.source_per_cluster);
  app.add_option("--pool", p.pool_size, "target pool size");
  app.add_option("--test", p.test_size, "target test size");
  app.add_option("--seed-size", p.seed_size, "seed split size written to the config");
  app.add_option("--dim", p.dim, "embedding width");
  app.add_option("--choices", p.choices, "choices per example");
  app.add_option("--source-shift", p.source_shift, "offset of source cluster centres");
  app.add_option("--pair-signal", p.pair_signal, "separation of correct and incorrect pair rows");
  app.add_option("--noise", p.noise, "per-coordinate spread around cluster centres");
  app.add_option("--key", p.key, "generator seed");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto fixture = ctlp::synth::make_cluster_fixture(p);
    std::cout << ctlp::synth::write_cluster_fixture(fixture, out).string() << '\n';
  } catch (const ctlp::Error& e) {
    std::cerr << e.what() << '\n';
    return ctlp::exit_code(e.category());
  }
  return 0;
}
