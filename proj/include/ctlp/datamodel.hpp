#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ctlp/error.hpp"
#include "ctlp/matrix.hpp"

namespace ctlp {

inline constexpr std::size_t kMaxChoices = 26;

/// A multiple-choice instance: a query plus 1..26 ordered choices. Labels are
/// 0-based choice indices; letters only appear when rendering prompts.
struct Example {
  std::string id;
  std::string query;
  std::vector<std::string> choices;
  std::optional<std::size_t> gold_label;

  friend bool operator==(const Example&, const Example&) = default;
};

enum class DatasetRole { kSource, kTargetSeed, kTargetUnlabeled, kTargetTest };

const char* to_string(DatasetRole role);
DatasetRole parse_role(std::string_view name);

struct Dataset {
  DatasetRole role = DatasetRole::kSource;
  std::string task_name;
  std::string task_definition;
  std::vector<Example> examples;

  std::size_t size() const noexcept { return examples.size(); }
  std::size_t total_choices() const;
  // Index of the example with this id, or nullopt.
  std::optional<std::size_t> find(std::string_view id) const;
  bool all_gold() const;
};

// Checks per-example invariants, id uniqueness and the role's gold-label rule.
void validate(const Dataset& dataset);

class DatasetParseError : public ParseError {
 public:
  DatasetParseError(std::size_t line, const std::string& message)
      : ParseError("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

Dataset parse_dataset(std::string_view jsonl, DatasetRole role, std::string task_name = {});
Dataset load_dataset(const std::filesystem::path& path, DatasetRole role,
                     std::string task_name = {});
std::string serialize_dataset(const Dataset& dataset);
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);

// Splits a pool into (target_seed, target_unlabeled) after a seeded shuffle.
std::pair<Dataset, Dataset> split_target(const Dataset& pool, std::size_t seed_size,
                                         std::uint64_t rng_seed);

// ---------------------------------------------------------------------------
// Embeddings

enum class EmbeddingKind { kExampleText, kPairText };

const char* to_string(EmbeddingKind kind);

struct EmbeddingMatrix {
  EmbeddingKind kind = EmbeddingKind::kExampleText;
  std::string task_name;
  DatasetRole role = DatasetRole::kSource;
  Matrix data;

  std::size_t n_rows() const noexcept { return data.rows(); }
  std::size_t dim() const noexcept { return data.cols(); }
};

class EmbeddingFileError : public Error {
 public:
  enum class Reason { kBadMagic, kBadVersion, kTruncated, kTrailingBytes, kRowCountMismatch,
                      kNonFinite, kZeroNorm };

  EmbeddingFileError(Reason reason, const std::string& message)
      : Error(reason == Reason::kRowCountMismatch || reason == Reason::kNonFinite ||
                      reason == Reason::kZeroNorm
                  ? ErrorCategory::kValidation
                  : ErrorCategory::kParse,
              message),
        reason_(reason) {}
  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

// Row count an embedding file of `kind` must have to align with `dataset`.
std::size_t expected_rows(const Dataset& dataset, EmbeddingKind kind);

// Row of the pair embedding for (example, choice) under canonical pair order.
std::vector<std::size_t> pair_row_offsets(const Dataset& dataset);

// XEMB v1: "XEMB" 0x01, u32 n_rows, u32 dim, n_rows*dim f32, all little-endian.
Matrix decode_xemb(std::string_view bytes);
std::string encode_xemb(const Matrix& matrix);

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const Dataset& expected,
                                EmbeddingKind kind);
// Same validation as load_embeddings for an in-memory matrix.
EmbeddingMatrix make_embeddings(Matrix data, const Dataset& expected, EmbeddingKind kind);
void write_embeddings(const std::filesystem::path& path, const Matrix& matrix);

// Gathers the rows of `all` belonging to `subset` (by id) out of `full`.
Matrix gather_example_rows(const Matrix& all, const Dataset& full, const Dataset& subset);

// ---------------------------------------------------------------------------
// Pseudo labels

enum class Provenance { kGold, kLlmSeed, kGlip };

const char* to_string(Provenance provenance);
Provenance parse_provenance(std::string_view name);

struct PseudoLabel {
  std::size_t choice = 0;
  Provenance provenance = Provenance::kGold;
  double score = 1.0;

  friend bool operator==(const PseudoLabel&, const PseudoLabel&) = default;
};

class PseudoLabeledSet {
 public:
  using Map = std::map<std::string, PseudoLabel, std::less<>>;

  void set(std::string id, PseudoLabel label) { entries_.insert_or_assign(std::move(id), label); }
  const PseudoLabel* find(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const Map& entries() const noexcept { return entries_; }

  // Adds every entry of `other`, overwriting duplicates.
  void merge(const PseudoLabeledSet& other);

  friend bool operator==(const PseudoLabeledSet&, const PseudoLabeledSet&) = default;

 private:
  Map entries_;
};

// Every id must exist in one of `datasets` and its choice must be in range.
void validate(const PseudoLabeledSet& labels, std::initializer_list<const Dataset*> datasets);

// Gold labels of every example of `dataset` (all must carry one).
PseudoLabeledSet gold_labels(const Dataset& dataset);

std::string serialize_pseudo_labels(const PseudoLabeledSet& labels);
PseudoLabeledSet parse_pseudo_labels(std::string_view jsonl);
void write_pseudo_labels(const std::filesystem::path& path, const PseudoLabeledSet& labels);
PseudoLabeledSet load_pseudo_labels(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Small file helpers shared by the IO modules.

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace ctlp
