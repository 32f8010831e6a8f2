#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ctlp/config.hpp"
#include "ctlp/datamodel.hpp"
#include "ctlp/matrix.hpp"
#include "ctlp/optim.hpp"

namespace ctlp {

using NodePair = std::pair<std::uint32_t, std::uint32_t>;

inline constexpr int kUnlabeled = -1;

/// Query-choice propagation graph. One node per (example, choice); positive
/// edges join similar nodes of different examples, negative edges join every
/// pair of nodes inside one example.
struct GlipGraph {
  struct Node {
    std::size_t example = 0;
    std::size_t choice = 0;
  };
  struct ExampleSpan {
    std::string id;
    std::size_t first_node = 0;
    std::size_t n_choices = 0;
    bool labeled = false;
  };

  Matrix features;
  std::vector<int> labels;  // kUnlabeled, 0 or 1
  std::vector<Node> nodes;
  std::vector<ExampleSpan> examples;
  std::vector<std::vector<std::uint32_t>> pos_neighbors;  // symmetric, sorted, no self
  std::vector<NodePair> neg_edges;                        // i < j, sorted, unique

  std::size_t n_nodes() const noexcept { return nodes.size(); }
  std::size_t pos_edge_count() const;
  std::size_t labeled_count() const;

  // Validates invariants and normalizes edge lists into sets; duplicate and
  // reversed entries collapse. Edges violating the same/different-example rule
  // are rejected.
  static GlipGraph assemble(Matrix features, std::vector<int> labels,
                            std::vector<ExampleSpan> examples,
                            std::span<const NodePair> pos_edges,
                            std::span<const NodePair> neg_edges);
};

// Nodes for `seed` examples first, then `unlabeled`, both in dataset order.
// Pair rows come from `pair_emb`, aligned to `pair_dataset` in canonical order.
// Seed examples absent from `seed_labels` become unlabeled nodes.
GlipGraph build_glip_graph(const PseudoLabeledSet& seed_labels, const Dataset& seed,
                           const Dataset& unlabeled, const Dataset& pair_dataset,
                           const Matrix& pair_emb, std::size_t k_pos, unsigned threads = 0);

/// Two single-head GAT layers plus a linear two-class head. Attention vectors
/// are stored as 2×hidden: row 0 scores the centre node, row 1 the neighbour.
struct GatModel {
  Matrix w1;
  Matrix a1;
  Matrix w2;
  Matrix a2;
  Matrix classifier;
  double leaky_slope = 0.2;
  std::uint64_t seed = 0;

  static constexpr std::size_t kParamCount = 5;
  static constexpr std::array<const char*, kParamCount> kParamNames = {"w1", "a1", "w2", "a2",
                                                                       "classifier"};
  std::array<Matrix*, kParamCount> params() { return {&w1, &a1, &w2, &a2, &classifier}; }
  std::array<const Matrix*, kParamCount> params() const {
    return {&w1, &a1, &w2, &a2, &classifier};
  }
  std::size_t hidden() const noexcept { return w1.cols(); }
  std::size_t input_dim() const noexcept { return w1.rows(); }

  friend bool operator==(const GatModel&, const GatModel&) = default;
};

// Glorot-uniform parameters drawn from per-parameter counter streams.
GatModel init_gat(std::uint64_t seed, std::size_t d_in, std::size_t hidden);

struct GatOutput {
  Matrix hidden;  // post-layer-2 node embeddings
  Matrix logits;  // n × 2
};

GatOutput gat_forward(const GatModel& model, const GlipGraph& graph);

// +mean cosine (kCosine) or -mean inner product (kLiteralInnerProduct) over
// the negative edges. 0 when there are none.
double mec_loss(const Matrix& hidden, std::span<const NodePair> neg_edges,
                MecForm form = MecForm::kCosine);

// Mean negative-edge cosine of the given embeddings.
double mean_neg_edge_cosine(const Matrix& hidden, std::span<const NodePair> neg_edges);

struct LossParts {
  double total = 0.0;
  double ce = 0.0;
  double mec = 0.0;
};

// L = L_CE + λ·L_MEC. When `grads` is non-null it receives ∂L/∂θ with the
// model's shapes.
LossParts glip_loss(const GatModel& model, const GlipGraph& graph, double lambda, MecForm form,
                    GatModel* grads = nullptr);

struct TrainOptions {
  std::size_t epochs = 25;
  double lr = 0.005;
  double lambda = 0.4;
  MecForm mec_form = MecForm::kCosine;
  std::size_t hidden = 64;
  std::uint64_t seed = 0;
  // When false only the classifier head is updated.
  bool train_attention_layers = true;

  static TrainOptions from_config(const RunConfig& config);
};

struct TrainState {
  Adam optimizer;
  std::vector<LossParts> history;  // one entry per completed epoch
};

struct TrainResult {
  GatModel model;
  TrainState state;
};

// Full-batch training. Throws NumericError if any epoch's loss is non-finite.
TrainResult train_glip(const GlipGraph& graph, const TrainOptions& options);

// Argmax of the class-1 logit over each example's nodes, ties to the lower
// index; only examples of `unlabeled` are reported.
PseudoLabeledSet predict_labels(const GatModel& model, const GlipGraph& graph,
                                const Dataset& unlabeled);

// "XGAT" 0x01, u32 tensor count, then per tensor: u32 name length, name,
// u32 rows, u32 cols, rows*cols f32; all little-endian.
std::string encode_model(const GatModel& model);
GatModel decode_model(std::string_view bytes);

nlohmann::json train_state_to_json(const TrainState& state);

}  // namespace ctlp
