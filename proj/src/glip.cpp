#include "ctlp/glip.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <unordered_map>

#include "ctlp/error.hpp"
#include "ctlp/graph.hpp"
#include "ctlp/rng.hpp"

namespace ctlp {

// ---------------------------------------------------------------------------
// Graph

std::size_t GlipGraph::pos_edge_count() const {
  std::size_t twice = 0;
  for (const auto& row : pos_neighbors) twice += row.size();
  return twice / 2;
}

std::size_t GlipGraph::labeled_count() const {
  return static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](int l) { return l != kUnlabeled; }));
}

GlipGraph GlipGraph::assemble(Matrix features, std::vector<int> labels,
                              std::vector<ExampleSpan> examples,
                              std::span<const NodePair> pos_edges,
                              std::span<const NodePair> neg_edges) {
  GlipGraph g;
  const std::size_t n = features.rows();
  if (labels.size() != n) throw ValidationError("GlipGraph: label count mismatch");

  g.nodes.resize(n);
  std::vector<bool> covered(n, false);
  for (std::size_t e = 0; e < examples.size(); ++e) {
    const auto& span = examples[e];
    if (span.n_choices == 0 || span.first_node + span.n_choices > n) {
      throw ValidationError("GlipGraph: example '" + span.id + "' has an invalid node range");
    }
    std::size_t positives = 0;
    for (std::size_t c = 0; c < span.n_choices; ++c) {
      const std::size_t node = span.first_node + c;
      if (covered[node]) throw ValidationError("GlipGraph: node owned by two examples");
      covered[node] = true;
      g.nodes[node] = {e, c};
      const int l = labels[node];
      if (span.labeled != (l != kUnlabeled)) {
        throw ValidationError("GlipGraph: example '" + span.id + "' mixes labeled and unlabeled nodes");
      }
      if (l != kUnlabeled && l != 0 && l != 1) throw ValidationError("GlipGraph: bad node label");
      positives += l == 1 ? 1 : 0;
    }
    if (span.labeled && positives != 1) {
      throw ValidationError("GlipGraph: labeled example '" + span.id +
                            "' must have exactly one positive node");
    }
  }
  if (std::find(covered.begin(), covered.end(), false) != covered.end()) {
    throw ValidationError("GlipGraph: node without an example");
  }

  auto check = [&](const NodePair& p) {
    if (p.first >= n || p.second >= n) throw ValidationError("GlipGraph: edge endpoint out of range");
    if (p.first == p.second) throw ValidationError("GlipGraph: self edge");
  };

  std::vector<std::vector<std::uint32_t>> directed(n);
  for (const auto& p : pos_edges) {
    check(p);
    if (g.nodes[p.first].example == g.nodes[p.second].example) {
      throw ValidationError("GlipGraph: positive edge inside one example");
    }
    directed[p.first].push_back(p.second);
  }
  g.pos_neighbors = symmetrize(directed);

  for (const auto& p : neg_edges) {
    check(p);
    if (g.nodes[p.first].example != g.nodes[p.second].example) {
      throw ValidationError("GlipGraph: negative edge across examples");
    }
    g.neg_edges.emplace_back(std::min(p.first, p.second), std::max(p.first, p.second));
  }
  std::sort(g.neg_edges.begin(), g.neg_edges.end());
  g.neg_edges.erase(std::unique(g.neg_edges.begin(), g.neg_edges.end()), g.neg_edges.end());

  g.features = std::move(features);
  g.labels = std::move(labels);
  g.examples = std::move(examples);
  return g;
}

GlipGraph build_glip_graph(const PseudoLabeledSet& seed_labels, const Dataset& seed,
                           const Dataset& unlabeled, const Dataset& pair_dataset,
                           const Matrix& pair_emb, std::size_t k_pos, unsigned threads) {
  validate(seed_labels, {&seed});
  if (pair_emb.rows() != pair_dataset.total_choices()) {
    throw ValidationError("pair embeddings do not match the pair dataset");
  }
  std::unordered_map<std::string_view, std::size_t> row_of;
  const auto offsets = pair_row_offsets(pair_dataset);
  for (std::size_t i = 0; i < pair_dataset.size(); ++i) {
    row_of.emplace(pair_dataset.examples[i].id, offsets[i]);
  }

  std::vector<GlipGraph::ExampleSpan> spans;
  std::vector<const Example*> owners;
  std::size_t n = 0;
  auto add = [&](const Dataset& ds, bool may_label) {
    for (const auto& ex : ds.examples) {
      const bool labeled = may_label && seed_labels.contains(ex.id);
      spans.push_back({ex.id, n, ex.choices.size(), labeled});
      owners.push_back(&ex);
      n += ex.choices.size();
    }
  };
  add(seed, true);
  add(unlabeled, false);

  Matrix features(n, pair_emb.cols());
  std::vector<int> labels(n, kUnlabeled);
  std::vector<std::size_t> groups(n);
  std::vector<NodePair> neg;
  for (std::size_t e = 0; e < spans.size(); ++e) {
    const auto& span = spans[e];
    const Example& ex = *owners[e];
    auto it = row_of.find(ex.id);
    if (it == row_of.end()) {
      throw ValidationError("no pair embeddings for example '" + ex.id + "'");
    }
    if (pair_dataset.examples[*pair_dataset.find(ex.id)].choices.size() != span.n_choices) {
      throw ValidationError("choice count differs for example '" + ex.id + "'");
    }
    const PseudoLabel* label = span.labeled ? seed_labels.find(ex.id) : nullptr;
    for (std::size_t c = 0; c < span.n_choices; ++c) {
      const std::size_t node = span.first_node + c;
      auto src = pair_emb.row(it->second + c);
      std::copy(src.begin(), src.end(), features.row(node).begin());
      groups[node] = e;
      if (label) labels[node] = label->choice == c ? 1 : 0;
      for (std::size_t c2 = c + 1; c2 < span.n_choices; ++c2) {
        neg.emplace_back(static_cast<std::uint32_t>(node),
                         static_cast<std::uint32_t>(span.first_node + c2));
      }
    }
  }

  std::vector<NodePair> pos;
  if (k_pos > 0) {
    const TaskGraph knn = build_knn_graph(features, k_pos, {true, groups, threads});
    for (std::size_t i = 0; i < knn.directed.size(); ++i) {
      for (auto j : knn.directed[i]) pos.emplace_back(static_cast<std::uint32_t>(i), j);
    }
  }
  return GlipGraph::assemble(std::move(features), std::move(labels), std::move(spans), pos, neg);
}

// ---------------------------------------------------------------------------
// Model

namespace {

Matrix glorot(std::uint64_t key, std::size_t rows, std::size_t cols, std::size_t fan_in,
              std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  CounterRng rng(key);
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = rng.uniform(-limit, limit);
  return m;
}

}  // namespace

GatModel init_gat(std::uint64_t seed, std::size_t d_in, std::size_t hidden) {
  GatModel m;
  m.seed = seed;
  m.w1 = glorot(derive_key(seed, 0), d_in, hidden, d_in, hidden);
  m.a1 = glorot(derive_key(seed, 1), 2, hidden, 2 * hidden, 1);
  m.w2 = glorot(derive_key(seed, 2), hidden, hidden, hidden, hidden);
  m.a2 = glorot(derive_key(seed, 3), 2, hidden, 2 * hidden, 1);
  m.classifier = glorot(derive_key(seed, 4), hidden, 2, hidden, 2);
  return m;
}

namespace {

// Attention neighbourhoods: positive neighbours plus the node itself, ascending.
struct AttentionCsr {
  std::vector<std::size_t> row_ptr;
  std::vector<std::uint32_t> cols;
};

AttentionCsr attention_structure(const GlipGraph& g) {
  AttentionCsr csr;
  csr.row_ptr.reserve(g.n_nodes() + 1);
  csr.row_ptr.push_back(0);
  for (std::size_t i = 0; i < g.n_nodes(); ++i) {
    bool self_done = false;
    for (auto j : g.pos_neighbors[i]) {
      if (!self_done && j > i) {
        csr.cols.push_back(static_cast<std::uint32_t>(i));
        self_done = true;
      }
      csr.cols.push_back(j);
    }
    if (!self_done) csr.cols.push_back(static_cast<std::uint32_t>(i));
    csr.row_ptr.push_back(csr.cols.size());
  }
  return csr;
}

struct LayerCache {
  Matrix z;                  // H_in · W
  std::vector<double> pre;   // s_i + t_j per attention entry
  std::vector<double> alpha; // softmax per attention entry
  Matrix agg;                // Σ α Z
};

LayerCache gat_layer_forward(const AttentionCsr& csr, const Matrix& h_in, const Matrix& w,
                             const Matrix& a, double slope) {
  LayerCache c;
  c.z = matmul(h_in, w);
  const std::size_t n = c.z.rows();
  std::vector<double> s(n);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = dot(a.row(0), c.z.row(i));
    t[i] = dot(a.row(1), c.z.row(i));
  }
  c.pre.resize(csr.cols.size());
  c.alpha.resize(csr.cols.size());
  c.agg = Matrix(n, c.z.cols());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b = csr.row_ptr[i];
    const std::size_t e = csr.row_ptr[i + 1];
    double max_score = -std::numeric_limits<double>::infinity();
    for (std::size_t k = b; k < e; ++k) {
      const double u = s[i] + t[csr.cols[k]];
      c.pre[k] = u;
      const double score = u > 0.0 ? u : slope * u;
      c.alpha[k] = score;
      max_score = std::max(max_score, score);
    }
    double denom = 0.0;
    for (std::size_t k = b; k < e; ++k) {
      c.alpha[k] = std::exp(c.alpha[k] - max_score);
      denom += c.alpha[k];
    }
    auto dst = c.agg.row(i);
    for (std::size_t k = b; k < e; ++k) {
      c.alpha[k] /= denom;
      auto src = c.z.row(csr.cols[k]);
      for (std::size_t col = 0; col < dst.size(); ++col) dst[col] += c.alpha[k] * src[col];
    }
  }
  return c;
}

// Given ∂L/∂agg, accumulates ∂L/∂W and ∂L/∂a; returns ∂L/∂H_in when wanted.
Matrix gat_layer_backward(const AttentionCsr& csr, const Matrix& h_in, const Matrix& w,
                          const Matrix& a, double slope, const LayerCache& c, const Matrix& d_agg,
                          Matrix& d_w, Matrix& d_a, bool want_input_grad) {
  const std::size_t n = c.z.rows();
  const std::size_t width = c.z.cols();
  Matrix d_z(n, width);
  std::vector<double> d_s(n, 0.0);
  std::vector<double> d_t(n, 0.0);
  std::vector<double> d_alpha;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b = csr.row_ptr[i];
    const std::size_t e = csr.row_ptr[i + 1];
    const auto g_i = d_agg.row(i);
    d_alpha.assign(e - b, 0.0);
    double weighted = 0.0;
    for (std::size_t k = b; k < e; ++k) {
      const std::size_t j = csr.cols[k];
      d_alpha[k - b] = dot(g_i, c.z.row(j));
      weighted += c.alpha[k] * d_alpha[k - b];
      auto dz_j = d_z.row(j);
      for (std::size_t col = 0; col < width; ++col) dz_j[col] += c.alpha[k] * g_i[col];
    }
    for (std::size_t k = b; k < e; ++k) {
      const double d_score = c.alpha[k] * (d_alpha[k - b] - weighted);
      const double d_pre = d_score * (c.pre[k] > 0.0 ? 1.0 : slope);
      d_s[i] += d_pre;
      d_t[csr.cols[k]] += d_pre;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto dz_i = d_z.row(i);
    const auto z_i = c.z.row(i);
    for (std::size_t col = 0; col < width; ++col) {
      dz_i[col] += d_s[i] * a(0, col) + d_t[i] * a(1, col);
      d_a(0, col) += d_s[i] * z_i[col];
      d_a(1, col) += d_t[i] * z_i[col];
    }
  }
  const Matrix dw = matmul_transpose_a(h_in, d_z);
  for (std::size_t i = 0; i < dw.size(); ++i) d_w.values()[i] += dw.values()[i];
  if (!want_input_grad) return {};
  return matmul_transpose_b(d_z, w);
}

struct ForwardCache {
  AttentionCsr csr;
  LayerCache l1;
  Matrix h1;  // ELU(l1.agg)
  LayerCache l2;
  Matrix logits;
};

ForwardCache forward_cached(const GatModel& m, const GlipGraph& g) {
  if (g.features.cols() != m.input_dim()) {
    throw ValidationError("GAT input width " + std::to_string(m.input_dim()) +
                          " does not match node features " + std::to_string(g.features.cols()));
  }
  ForwardCache f;
  f.csr = attention_structure(g);
  f.l1 = gat_layer_forward(f.csr, g.features, m.w1, m.a1, m.leaky_slope);
  f.h1 = f.l1.agg;
  for (auto& v : f.h1.values()) v = v > 0.0 ? v : std::expm1(v);
  f.l2 = gat_layer_forward(f.csr, f.h1, m.w2, m.a2, m.leaky_slope);
  f.logits = matmul(f.l2.agg, m.classifier);
  return f;
}

}  // namespace

GatOutput gat_forward(const GatModel& model, const GlipGraph& graph) {
  ForwardCache f = forward_cached(model, graph);
  return {std::move(f.l2.agg), std::move(f.logits)};
}

double mean_neg_edge_cosine(const Matrix& hidden, std::span<const NodePair> neg_edges) {
  if (neg_edges.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [i, j] : neg_edges) {
    const double ni = l2_norm(hidden.row(i));
    const double nj = l2_norm(hidden.row(j));
    if (ni > 0.0 && nj > 0.0) sum += dot(hidden.row(i), hidden.row(j)) / (ni * nj);
  }
  return sum / static_cast<double>(neg_edges.size());
}

double mec_loss(const Matrix& hidden, std::span<const NodePair> neg_edges, MecForm form) {
  if (neg_edges.empty()) return 0.0;
  if (form == MecForm::kCosine) return mean_neg_edge_cosine(hidden, neg_edges);
  double sum = 0.0;
  for (const auto& [i, j] : neg_edges) sum += dot(hidden.row(i), hidden.row(j));
  return -sum / static_cast<double>(neg_edges.size());
}

LossParts glip_loss(const GatModel& model, const GlipGraph& graph, double lambda, MecForm form,
                    GatModel* grads) {
  const ForwardCache f = forward_cached(model, graph);
  const Matrix& h2 = f.l2.agg;
  const std::size_t n = graph.n_nodes();

  LossParts parts;
  const std::size_t n_labeled = graph.labeled_count();
  Matrix d_logits(n, 2);
  if (n_labeled > 0) {
    const double inv = 1.0 / static_cast<double>(n_labeled);
    for (std::size_t i = 0; i < n; ++i) {
      const int y = graph.labels[i];
      if (y == kUnlabeled) continue;
      const double l0 = f.logits(i, 0);
      const double l1 = f.logits(i, 1);
      const double mx = std::max(l0, l1);
      const double lse = mx + std::log(std::exp(l0 - mx) + std::exp(l1 - mx));
      parts.ce -= (y == 1 ? l1 : l0) - lse;
      const double p1 = std::exp(l1 - lse);
      const double p0 = std::exp(l0 - lse);
      d_logits(i, 0) = (p0 - (y == 0 ? 1.0 : 0.0)) * inv;
      d_logits(i, 1) = (p1 - (y == 1 ? 1.0 : 0.0)) * inv;
    }
    parts.ce *= inv;
  }
  parts.mec = mec_loss(h2, graph.neg_edges, form);
  parts.total = parts.ce + lambda * parts.mec;
  if (!grads) return parts;

  *grads = model;
  for (Matrix* p : grads->params()) p->fill(0.0);
  grads->classifier = matmul_transpose_a(h2, d_logits);
  Matrix d_h2 = matmul_transpose_b(d_logits, model.classifier);

  if (!graph.neg_edges.empty() && lambda != 0.0) {
    const double scale = lambda / static_cast<double>(graph.neg_edges.size());
    for (const auto& [i, j] : graph.neg_edges) {
      const auto hi = h2.row(i);
      const auto hj = h2.row(j);
      auto gi = d_h2.row(i);
      auto gj = d_h2.row(j);
      if (form == MecForm::kLiteralInnerProduct) {
        for (std::size_t c = 0; c < hi.size(); ++c) {
          gi[c] -= scale * hj[c];
          gj[c] -= scale * hi[c];
        }
        continue;
      }
      const double ni = l2_norm(hi);
      const double nj = l2_norm(hj);
      if (ni == 0.0 || nj == 0.0) continue;
      const double cos = dot(hi, hj) / (ni * nj);
      for (std::size_t c = 0; c < hi.size(); ++c) {
        gi[c] += scale * (hj[c] / (ni * nj) - cos * hi[c] / (ni * ni));
        gj[c] += scale * (hi[c] / (ni * nj) - cos * hj[c] / (nj * nj));
      }
    }
  }

  Matrix d_h1 = gat_layer_backward(f.csr, f.h1, model.w2, model.a2, model.leaky_slope, f.l2, d_h2,
                                   grads->w2, grads->a2, true);
  for (std::size_t i = 0; i < d_h1.size(); ++i) {
    const double x = f.l1.agg.values()[i];
    if (x <= 0.0) d_h1.values()[i] *= std::exp(x);
  }
  gat_layer_backward(f.csr, graph.features, model.w1, model.a1, model.leaky_slope, f.l1, d_h1,
                     grads->w1, grads->a1, false);
  return parts;
}

// ---------------------------------------------------------------------------
// Training

TrainOptions TrainOptions::from_config(const RunConfig& config) {
  TrainOptions o;
  o.epochs = config.epochs;
  o.lr = config.lr;
  o.lambda = config.lambda_mec;
  o.mec_form = config.mec_form;
  o.hidden = config.gat_hidden;
  o.seed = derive_key(config.seed, "glip_gat");
  return o;
}

namespace {

std::vector<std::size_t> param_sizes(const GatModel& m) {
  std::vector<std::size_t> sizes;
  for (const Matrix* p : m.params()) sizes.push_back(p->size());
  return sizes;
}

}  // namespace

TrainResult train_glip(const GlipGraph& graph, const TrainOptions& options) {
  if (graph.labeled_count() == 0) throw ValidationError("train_glip: no labeled nodes");
  GatModel model = init_gat(options.seed, graph.features.cols(), options.hidden);
  const auto sizes = param_sizes(model);
  TrainResult result{model, {Adam({options.lr}, sizes), {}}};
  GatModel& m = result.model;

  GatModel grads;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    const LossParts parts = glip_loss(m, graph, options.lambda, options.mec_form, &grads);
    if (!std::isfinite(parts.total) || !std::isfinite(parts.ce) || !std::isfinite(parts.mec)) {
      throw NumericError("non-finite GLIP loss at epoch " + std::to_string(epoch + 1) +
                         " (ce=" + std::to_string(parts.ce) + ", mec=" + std::to_string(parts.mec) +
                         ", completed epochs=" + std::to_string(result.state.history.size()) + ")");
    }
    result.state.history.push_back(parts);

    if (!options.train_attention_layers) {
      for (Matrix* g : {&grads.w1, &grads.a1, &grads.w2, &grads.a2}) g->fill(0.0);
    }
    std::vector<std::span<double>> p;
    std::vector<std::span<const double>> g;
    for (Matrix* x : m.params()) p.emplace_back(x->values());
    for (const Matrix* x : std::as_const(grads).params()) g.emplace_back(x->values());
    result.state.optimizer.step(p, g);
  }
  return result;
}

PseudoLabeledSet predict_labels(const GatModel& model, const GlipGraph& graph,
                                const Dataset& unlabeled) {
  const GatOutput out = gat_forward(model, graph);
  std::unordered_map<std::string_view, std::size_t> span_of;
  for (std::size_t e = 0; e < graph.examples.size(); ++e) span_of.emplace(graph.examples[e].id, e);

  PseudoLabeledSet labels;
  for (const auto& ex : unlabeled.examples) {
    auto it = span_of.find(ex.id);
    if (it == span_of.end()) throw ValidationError("example '" + ex.id + "' is not in the graph");
    const auto& span = graph.examples[it->second];
    std::size_t best = 0;
    for (std::size_t c = 1; c < span.n_choices; ++c) {
      if (out.logits(span.first_node + c, 1) > out.logits(span.first_node + best, 1)) best = c;
    }
    const std::size_t node = span.first_node + best;
    const double margin = out.logits(node, 1) - out.logits(node, 0);
    labels.set(ex.id, {best, Provenance::kGlip, 1.0 / (1.0 + std::exp(-margin))});
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kModelMagic[4] = {'X', 'G', 'A', 'T'};
constexpr std::uint8_t kModelVersion = 0x01;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  std::string_view bytes;
  std::size_t pos = 0;

  std::uint32_t u32() {
    if (pos + 4 > bytes.size()) throw ParseError("model dump truncated");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    pos += 4;
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  std::string_view take(std::size_t n) {
    if (pos + n > bytes.size()) throw ParseError("model dump truncated");
    auto s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

std::string encode_model(const GatModel& model) {
  std::string out(kModelMagic, 4);
  out.push_back(static_cast<char>(kModelVersion));
  const Matrix slope(1, 1, model.leaky_slope);
  put_u32(out, GatModel::kParamCount + 1);
  auto put_tensor = [&](std::string_view name, const Matrix& m) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (double v : m.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  };
  const auto params = model.params();
  for (std::size_t i = 0; i < GatModel::kParamCount; ++i) {
    put_tensor(GatModel::kParamNames[i], *params[i]);
  }
  put_tensor("leaky_slope", slope);
  return out;
}

GatModel decode_model(std::string_view bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kModelMagic, 4) != 0) {
    throw ParseError("model dump: bad magic");
  }
  if (static_cast<std::uint8_t>(bytes[4]) != kModelVersion) {
    throw ParseError("model dump: unsupported version");
  }
  Reader r{bytes, 5};
  GatModel model;
  const auto params = model.params();
  const std::uint32_t count = r.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string name(r.take(r.u32()));
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    Matrix m(rows, cols);
    for (auto& v : m.values()) v = std::bit_cast<float>(r.u32());
    if (name == "leaky_slope") {
      if (m.size() != 1) throw ParseError("model dump: bad leaky_slope tensor");
      model.leaky_slope = m.values()[0];
      continue;
    }
    bool known = false;
    for (std::size_t i = 0; i < GatModel::kParamCount; ++i) {
      if (name == GatModel::kParamNames[i]) {
        *params[i] = std::move(m);
        known = true;
      }
    }
    if (!known) throw ParseError("model dump: unknown tensor '" + name + "'");
  }
  if (r.pos != bytes.size()) throw ParseError("model dump: trailing bytes");
  return model;
}

nlohmann::json train_state_to_json(const TrainState& state) {
  nlohmann::json history = nlohmann::json::array();
  for (std::size_t e = 0; e < state.history.size(); ++e) {
    const auto& h = state.history[e];
    history.push_back({{"epoch", e + 1}, {"total", h.total}, {"ce", h.ce}, {"mec", h.mec}});
  }
  const auto& o = state.optimizer.options();
  return {{"optimizer",
           {{"name", "adam"}, {"lr", o.lr}, {"beta1", o.beta1}, {"beta2", o.beta2}, {"eps", o.eps},
            {"steps", state.optimizer.steps()}}},
          {"history", history}};
}

}  // namespace ctlp
