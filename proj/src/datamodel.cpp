#include "ctlp/datamodel.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "ctlp/rng.hpp"

namespace ctlp {

using nlohmann::json;

const char* to_string(DatasetRole role) {
  switch (role) {
    case DatasetRole::kSource:
      return "source";
    case DatasetRole::kTargetSeed:
      return "target_seed";
    case DatasetRole::kTargetUnlabeled:
      return "target_unlabeled";
    case DatasetRole::kTargetTest:
      return "target_test";
  }
  return "unknown";
}

DatasetRole parse_role(std::string_view name) {
  for (auto role : {DatasetRole::kSource, DatasetRole::kTargetSeed, DatasetRole::kTargetUnlabeled,
                    DatasetRole::kTargetTest}) {
    if (name == to_string(role)) return role;
  }
  throw ConfigError("unknown dataset role '" + std::string(name) + "'");
}

std::size_t Dataset::total_choices() const {
  std::size_t n = 0;
  for (const auto& ex : examples) n += ex.choices.size();
  return n;
}

std::optional<std::size_t> Dataset::find(std::string_view id) const {
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].id == id) return i;
  }
  return std::nullopt;
}

bool Dataset::all_gold() const {
  for (const auto& ex : examples) {
    if (!ex.gold_label) return false;
  }
  return true;
}

namespace {

void validate_example(const Example& ex, const std::string& where) {
  if (ex.id.empty()) throw ValidationError(where + ": empty id");
  if (ex.choices.empty()) throw ValidationError(where + ": example '" + ex.id + "' has no choices");
  if (ex.choices.size() > kMaxChoices) {
    throw ValidationError(where + ": example '" + ex.id + "' has more than 26 choices");
  }
  if (ex.gold_label && *ex.gold_label >= ex.choices.size()) {
    throw ValidationError(where + ": example '" + ex.id + "' label out of range");
  }
}

bool role_requires_gold(DatasetRole role) {
  return role == DatasetRole::kSource || role == DatasetRole::kTargetTest;
}

}  // namespace

void validate(const Dataset& dataset) {
  std::unordered_set<std::string_view> seen;
  for (std::size_t i = 0; i < dataset.examples.size(); ++i) {
    const auto& ex = dataset.examples[i];
    const std::string where = "example " + std::to_string(i + 1);
    validate_example(ex, where);
    if (!seen.insert(ex.id).second) {
      throw ValidationError(where + ": duplicate id '" + ex.id + "'");
    }
    if (role_requires_gold(dataset.role) && !ex.gold_label) {
      throw ValidationError(where + ": '" + ex.id + "' has no gold label, required for role " +
                            to_string(dataset.role));
    }
  }
}

Dataset parse_dataset(std::string_view jsonl, DatasetRole role, std::string task_name) {
  Dataset ds;
  ds.role = role;
  ds.task_name = std::move(task_name);

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DatasetParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) throw DatasetParseError(line_no, "expected a JSON object");

    Example ex;
    try {
      ex.id = obj.at("id").get<std::string>();
      ex.query = obj.at("query").get<std::string>();
      ex.choices = obj.at("choices").get<std::vector<std::string>>();
      if (auto it = obj.find("label"); it != obj.end() && !it->is_null()) {
        if (!it->is_number_integer() || it->get<long long>() < 0) {
          throw DatasetParseError(line_no, "label must be a non-negative integer");
        }
        ex.gold_label = it->get<std::size_t>();
      }
    } catch (const json::exception& e) {
      throw DatasetParseError(line_no, std::string("bad field: ") + e.what());
    }
    validate_example(ex, "line " + std::to_string(line_no));
    ds.examples.push_back(std::move(ex));
  }
  validate(ds);
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, DatasetRole role, std::string task_name) {
  if (task_name.empty()) task_name = path.stem().string();
  return parse_dataset(read_file(path), role, std::move(task_name));
}

std::string serialize_dataset(const Dataset& dataset) {
  std::string out;
  for (const auto& ex : dataset.examples) {
    json obj = {{"id", ex.id}, {"query", ex.query}, {"choices", ex.choices}};
    if (ex.gold_label) obj["label"] = *ex.gold_label;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  write_file(path, serialize_dataset(dataset));
}

std::pair<Dataset, Dataset> split_target(const Dataset& pool, std::size_t seed_size,
                                         std::uint64_t rng_seed) {
  if (seed_size > pool.size()) {
    throw ValidationError("seed size " + std::to_string(seed_size) + " exceeds pool size " +
                          std::to_string(pool.size()));
  }
  const auto perm = seeded_permutation(pool.size(), derive_key(rng_seed, "split_target"));
  Dataset seed{DatasetRole::kTargetSeed, pool.task_name, pool.task_definition, {}};
  Dataset rest{DatasetRole::kTargetUnlabeled, pool.task_name, pool.task_definition, {}};
  for (std::size_t i = 0; i < perm.size(); ++i) {
    (i < seed_size ? seed : rest).examples.push_back(pool.examples[perm[i]]);
  }
  return {std::move(seed), std::move(rest)};
}

// ---------------------------------------------------------------------------

const char* to_string(EmbeddingKind kind) {
  return kind == EmbeddingKind::kExampleText ? "example_text" : "pair_text";
}

std::size_t expected_rows(const Dataset& dataset, EmbeddingKind kind) {
  return kind == EmbeddingKind::kExampleText ? dataset.size() : dataset.total_choices();
}

std::vector<std::size_t> pair_row_offsets(const Dataset& dataset) {
  std::vector<std::size_t> offsets;
  offsets.reserve(dataset.size());
  std::size_t acc = 0;
  for (const auto& ex : dataset.examples) {
    offsets.push_back(acc);
    acc += ex.choices.size();
  }
  return offsets;
}

namespace {

constexpr char kMagic[4] = {'X', 'E', 'M', 'B'};
constexpr std::uint8_t kVersion = 0x01;
constexpr std::size_t kHeaderSize = 4 + 1 + 4 + 4;

std::uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void append_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

Matrix decode_xemb(std::string_view bytes) {
  using R = EmbeddingFileError::Reason;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw EmbeddingFileError(R::kBadMagic, "embedding file: missing XEMB magic");
  }
  if (bytes.size() < kHeaderSize) {
    throw EmbeddingFileError(R::kTruncated, "embedding file: truncated header");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (p[4] != kVersion) {
    throw EmbeddingFileError(R::kBadVersion,
                             "embedding file: unsupported version " + std::to_string(p[4]));
  }
  const std::uint32_t rows = read_u32_le(p + 5);
  const std::uint32_t dim = read_u32_le(p + 9);
  const std::uint64_t payload = std::uint64_t{rows} * dim * 4;
  const std::uint64_t available = bytes.size() - kHeaderSize;
  if (available < payload) {
    throw EmbeddingFileError(R::kTruncated, "embedding file: expected " + std::to_string(payload) +
                                                " payload bytes, found " +
                                                std::to_string(available));
  }
  if (available > payload) {
    throw EmbeddingFileError(R::kTrailingBytes, "embedding file: trailing bytes after payload");
  }

  Matrix m(rows, dim);
  const unsigned char* q = p + kHeaderSize;
  for (std::size_t i = 0; i < m.size(); ++i, q += 4) {
    const float f = std::bit_cast<float>(read_u32_le(q));
    if (!std::isfinite(f)) {
      throw EmbeddingFileError(R::kNonFinite, "embedding file: non-finite value at row " +
                                                  std::to_string(i / std::max<std::size_t>(dim, 1)));
    }
    m.values()[i] = f;
  }
  return m;
}

std::string encode_xemb(const Matrix& matrix) {
  std::string out(kMagic, 4);
  out.push_back(static_cast<char>(kVersion));
  append_u32_le(out, static_cast<std::uint32_t>(matrix.rows()));
  append_u32_le(out, static_cast<std::uint32_t>(matrix.cols()));
  out.reserve(out.size() + matrix.size() * 4);
  for (double v : matrix.values()) {
    append_u32_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

EmbeddingMatrix make_embeddings(Matrix data, const Dataset& expected, EmbeddingKind kind) {
  using R = EmbeddingFileError::Reason;
  const std::size_t want = expected_rows(expected, kind);
  if (data.rows() != want) {
    throw EmbeddingFileError(R::kRowCountMismatch,
                             std::string("embedding row count mismatch for ") + to_string(kind) +
                                 ": expected " + std::to_string(want) + ", got " +
                                 std::to_string(data.rows()));
  }
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (double v : data.row(r)) {
      if (!std::isfinite(v)) {
        throw EmbeddingFileError(R::kNonFinite, "non-finite embedding at row " + std::to_string(r));
      }
    }
    if (l2_norm(data.row(r)) == 0.0) {
      throw EmbeddingFileError(R::kZeroNorm, "zero-norm embedding at row " + std::to_string(r));
    }
  }
  return EmbeddingMatrix{kind, expected.task_name, expected.role, std::move(data)};
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const Dataset& expected,
                                EmbeddingKind kind) {
  return make_embeddings(decode_xemb(read_file(path)), expected, kind);
}

void write_embeddings(const std::filesystem::path& path, const Matrix& matrix) {
  write_file(path, encode_xemb(matrix));
}

Matrix gather_example_rows(const Matrix& all, const Dataset& full, const Dataset& subset) {
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < full.size(); ++i) index.emplace(full.examples[i].id, i);
  Matrix out(subset.size(), all.cols());
  for (std::size_t i = 0; i < subset.size(); ++i) {
    auto it = index.find(subset.examples[i].id);
    if (it == index.end()) {
      throw ValidationError("example '" + subset.examples[i].id + "' not found in " +
                            full.task_name);
    }
    auto src = all.row(it->second);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------

const char* to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::kGold:
      return "gold";
    case Provenance::kLlmSeed:
      return "llm_seed";
    case Provenance::kGlip:
      return "glip";
  }
  return "unknown";
}

Provenance parse_provenance(std::string_view name) {
  for (auto p : {Provenance::kGold, Provenance::kLlmSeed, Provenance::kGlip}) {
    if (name == to_string(p)) return p;
  }
  throw ParseError("unknown provenance '" + std::string(name) + "'");
}

const PseudoLabel* PseudoLabeledSet::find(std::string_view id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

void PseudoLabeledSet::merge(const PseudoLabeledSet& other) {
  for (const auto& [id, label] : other.entries_) entries_.insert_or_assign(id, label);
}

void validate(const PseudoLabeledSet& labels, std::initializer_list<const Dataset*> datasets) {
  for (const auto& [id, label] : labels.entries()) {
    const Example* ex = nullptr;
    for (const Dataset* ds : datasets) {
      if (auto idx = ds->find(id)) {
        ex = &ds->examples[*idx];
        break;
      }
    }
    if (!ex) throw ValidationError("pseudo label references unknown example '" + id + "'");
    if (label.choice >= ex->choices.size()) {
      throw ValidationError("pseudo label for '" + id + "' out of range");
    }
  }
}

PseudoLabeledSet gold_labels(const Dataset& dataset) {
  PseudoLabeledSet out;
  for (const auto& ex : dataset.examples) {
    if (!ex.gold_label) throw ValidationError("example '" + ex.id + "' has no gold label");
    out.set(ex.id, {*ex.gold_label, Provenance::kGold, 1.0});
  }
  return out;
}

std::string serialize_pseudo_labels(const PseudoLabeledSet& labels) {
  std::string out;
  for (const auto& [id, label] : labels.entries()) {
    json obj = {{"id", id},
                {"choice", label.choice},
                {"provenance", to_string(label.provenance)},
                {"score", label.score}};
    out += obj.dump();
    out += '\n';
  }
  return out;
}

PseudoLabeledSet parse_pseudo_labels(std::string_view jsonl) {
  PseudoLabeledSet out;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json obj = json::parse(line);
      out.set(obj.at("id").get<std::string>(),
              {obj.at("choice").get<std::size_t>(),
               parse_provenance(obj.at("provenance").get<std::string>()),
               obj.at("score").get<double>()});
    } catch (const json::exception& e) {
      throw DatasetParseError(line_no, std::string("bad pseudo label: ") + e.what());
    }
  }
  return out;
}

void write_pseudo_labels(const std::filesystem::path& path, const PseudoLabeledSet& labels) {
  write_file(path, serialize_pseudo_labels(labels));
}

PseudoLabeledSet load_pseudo_labels(const std::filesystem::path& path) {
  return parse_pseudo_labels(read_file(path));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

}  // namespace ctlp
