#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tartan/schema.hpp"

namespace tartan {

// Seed mixed into every feature hash. Changing it invalidates checkpoints.
inline constexpr std::uint64_t kFeatureHashSeed = 0x74617274616E3031ULL;

inline constexpr std::size_t kDefaultMaxLen = 256;
inline constexpr std::uint32_t kDefaultBuckets = 1u << 20;
inline constexpr std::uint32_t kDefaultDim = 64;
inline constexpr std::uint32_t kDefaultHiddenDim = 64;
inline constexpr double kDefaultTemperature = 0.05;

// Lowercased ASCII-alphanumeric tokens; any other ASCII byte separates
// tokens, bytes >= 0x80 are kept as token characters. Stops after max_len.
std::vector<std::string> tokenize(std::string_view text, std::size_t max_len = kDefaultMaxLen);

// Bucket of a unigram ("tok") or bigram ("tok1 tok2") feature string:
//   mix64(fnv1a64(feature) ^ kFeatureHashSeed) % num_buckets
std::uint32_t feature_bucket(std::string_view feature, std::uint32_t num_buckets);

// Sparse bag of hashed unigram + bigram features.
struct FeatureIds {
  std::vector<std::uint32_t> ids;     // strictly ascending
  std::vector<std::uint32_t> counts;  // parallel to ids, each >= 1

  bool empty() const { return ids.empty(); }
  std::size_t size() const { return ids.size(); }
  std::uint64_t total() const;

  bool operator==(const FeatureIds&) const = default;
};

FeatureIds featurize(std::string_view text, std::uint32_t num_buckets,
                     std::size_t max_len = kDefaultMaxLen);

// num_rows x dim table whose rows are materialized on first write. An
// untouched row reads as its deterministic initial value, a pure function of
// (seed, row): uniform in [-scale, scale], rounded to float precision.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::uint32_t num_rows, std::uint32_t dim, std::uint64_t seed, double scale);

  std::uint32_t num_rows() const { return num_rows_; }
  std::uint32_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  double scale() const { return scale_; }

  void initial_row(std::uint32_t row, std::span<double> out) const;
  void read_row(std::uint32_t row, std::span<double> out) const;
  // acc += weight * row
  void accumulate_row(std::uint32_t row, double weight, std::span<double> acc) const;

  std::span<double> mutable_row(std::uint32_t row);
  const std::vector<double>* materialized(std::uint32_t row) const;
  std::vector<std::uint32_t> materialized_rows() const;  // ascending
  std::size_t materialized_count() const { return rows_.size(); }

  bool operator==(const EmbeddingTable& other) const;

 private:
  std::uint32_t num_rows_ = 0;
  std::uint32_t dim_ = 0;
  std::uint64_t seed_ = 0;
  double scale_ = 0.0;
  std::unordered_map<std::uint32_t, std::vector<double>> rows_;
};

// Dual encoder: E(x) = normalize(P * mean_pool(table, features(x))).
struct DualParams {
  std::uint32_t num_buckets = 0;
  std::uint32_t dim = 0;
  double temperature = kDefaultTemperature;
  EmbeddingTable table;
  std::vector<double> empty_row;   // used when a text has no features
  std::vector<double> projection;  // dim x dim, row-major; u_i = sum_j P[i][j] m_j

  static DualParams init(std::uint32_t num_buckets, std::uint32_t dim, double temperature,
                         std::uint64_t seed);

  bool operator==(const DualParams&) const = default;
};

// Cross encoder: p = sigmoid(w . tanh(W^T mean_pool(features(t q d)) + b) + c).
struct CrossParams {
  std::uint32_t num_buckets = 0;
  std::uint32_t dim = 0;
  std::uint32_t hidden_dim = 0;
  EmbeddingTable table;
  std::vector<double> hidden;       // dim x hidden_dim, row-major; a_j = sum_k x_k W[k][j] + b_j
  std::vector<double> hidden_bias;  // hidden_dim
  std::vector<double> output;       // hidden_dim
  double output_bias = 0.0;

  static CrossParams init(std::uint32_t num_buckets, std::uint32_t dim, std::uint32_t hidden_dim,
                          std::uint64_t seed);
  static CrossParams zeros(std::uint32_t num_buckets, std::uint32_t dim,
                           std::uint32_t hidden_dim);

  bool operator==(const CrossParams&) const = default;
};

// Stable content hash over hyperparameters and all effective parameter values.
std::uint64_t fingerprint(const DualParams& params);
std::uint64_t fingerprint(const CrossParams& params);

struct EncoderOptions {
  std::size_t max_len = kDefaultMaxLen;
  bool include_title = true;  // title is prepended to the body with one space
};

std::string document_text(const Document& doc, const EncoderOptions& options = {});

struct Embedding {
  std::vector<double> values;

  bool operator==(const Embedding&) const = default;
};

// Intermediate values of one dual forward pass; training backpropagates
// through these.
struct DualTrace {
  FeatureIds features;
  std::vector<double> pooled;     // m
  std::vector<double> projected;  // u = P m
  double norm = 0.0;              // |u|
  Embedding embedding;            // u / |u|
};

DualTrace dual_forward(const DualParams& params, FeatureIds features);
Embedding embed(const DualParams& params, std::string_view text,
                const EncoderOptions& options = {});

double dot(std::span<const double> a, std::span<const double> b);

double score_dual(const DualParams& params, const InstructionSlot& instruction, const Query& query,
                  const Document& doc, const EncoderOptions& options = {});

struct CrossTrace {
  FeatureIds features;
  std::vector<double> pooled;  // x
  std::vector<double> hidden;  // h = tanh(a)
  double logit = 0.0;
  double probability = 0.5;
};

// Cross-encoder input text: instruction, query and document joined by single
// spaces (the NoInstruction sentinel drops the instruction part).
std::string cross_input(const InstructionSlot& instruction, const Query& query, const Document& doc,
                        const EncoderOptions& options = {});

CrossTrace cross_forward(const CrossParams& params, FeatureIds features);
double score_cross(const CrossParams& params, const InstructionSlot& instruction,
                   const Query& query, const Document& doc, const EncoderOptions& options = {});

double logistic(double z);

}  // namespace tartan
