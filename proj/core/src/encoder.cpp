#include "tartan/encoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>

#include "tartan/error.hpp"
#include "tartan/rng.hpp"

namespace tartan {

namespace {

bool token_char(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

double round_to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

// Hash accumulator for fingerprints.
struct Hasher {
  std::uint64_t h = 0x6A09E667F3BCC909ULL;
  void add(std::uint64_t v) { h = mix64(h ^ v); }
  void add(double v) { add(std::bit_cast<std::uint64_t>(v)); }
  void add(std::span<const double> vs) {
    add(static_cast<std::uint64_t>(vs.size()));
    for (double v : vs) add(v);
  }
};

void hash_table(Hasher& hs, const EmbeddingTable& table) {
  hs.add(static_cast<std::uint64_t>(table.num_rows()));
  hs.add(static_cast<std::uint64_t>(table.dim()));
  hs.add(table.seed());
  hs.add(table.scale());
  std::vector<double> init(table.dim());
  for (const auto r : table.materialized_rows()) {
    const auto* row = table.materialized(r);
    table.initial_row(r, init);
    if (*row == init) continue;
    hs.add(static_cast<std::uint64_t>(r));
    hs.add(*row);
  }
}

void check_finite(double v, const char* where) {
  if (!std::isfinite(v)) throw numeric_error("numeric_overflow", where);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, std::size_t max_len) {
  std::vector<std::string> tokens;
  std::string cur;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (token_char(c)) {
      cur += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch;
    } else if (!cur.empty()) {
      if (tokens.size() >= max_len) return tokens;
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty() && tokens.size() < max_len) tokens.push_back(std::move(cur));
  return tokens;
}

std::uint32_t feature_bucket(std::string_view feature, std::uint32_t num_buckets) {
  return static_cast<std::uint32_t>(mix64(fnv1a64(feature) ^ kFeatureHashSeed) % num_buckets);
}

std::uint64_t FeatureIds::total() const {
  std::uint64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

FeatureIds featurize(std::string_view text, std::uint32_t num_buckets, std::size_t max_len) {
  const auto tokens = tokenize(text, max_len);
  std::map<std::uint32_t, std::uint32_t> merged;
  std::string bigram;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    ++merged[feature_bucket(tokens[i], num_buckets)];
    if (i + 1 < tokens.size()) {
      bigram.assign(tokens[i]);
      bigram += ' ';
      bigram += tokens[i + 1];
      ++merged[feature_bucket(bigram, num_buckets)];
    }
  }
  FeatureIds out;
  out.ids.reserve(merged.size());
  out.counts.reserve(merged.size());
  for (const auto& [id, count] : merged) {
    out.ids.push_back(id);
    out.counts.push_back(count);
  }
  return out;
}

EmbeddingTable::EmbeddingTable(std::uint32_t num_rows, std::uint32_t dim, std::uint64_t seed,
                               double scale)
    : num_rows_(num_rows), dim_(dim), seed_(seed), scale_(scale) {}

void EmbeddingTable::initial_row(std::uint32_t row, std::span<double> out) const {
  if (scale_ == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  std::uint64_t state = derive_seed(seed_, static_cast<std::uint64_t>(row));
  for (std::uint32_t c = 0; c < dim_; ++c) {
    state += 0x9E3779B97F4A7C15ULL;
    const double u = static_cast<double>(mix64(state) >> 11) * 0x1.0p-53;
    out[c] = round_to_float((2.0 * u - 1.0) * scale_);
  }
}

void EmbeddingTable::read_row(std::uint32_t row, std::span<double> out) const {
  if (const auto* m = materialized(row)) {
    std::copy(m->begin(), m->end(), out.begin());
  } else {
    initial_row(row, out);
  }
}

void EmbeddingTable::accumulate_row(std::uint32_t row, double weight, std::span<double> acc) const {
  if (const auto* m = materialized(row)) {
    for (std::uint32_t c = 0; c < dim_; ++c) acc[c] += weight * (*m)[c];
    return;
  }
  if (scale_ == 0.0) return;
  std::uint64_t state = derive_seed(seed_, static_cast<std::uint64_t>(row));
  for (std::uint32_t c = 0; c < dim_; ++c) {
    state += 0x9E3779B97F4A7C15ULL;
    const double u = static_cast<double>(mix64(state) >> 11) * 0x1.0p-53;
    acc[c] += weight * round_to_float((2.0 * u - 1.0) * scale_);
  }
}

std::span<double> EmbeddingTable::mutable_row(std::uint32_t row) {
  auto it = rows_.find(row);
  if (it == rows_.end()) {
    std::vector<double> init(dim_);
    initial_row(row, init);
    it = rows_.emplace(row, std::move(init)).first;
  }
  return it->second;
}

const std::vector<double>* EmbeddingTable::materialized(std::uint32_t row) const {
  const auto it = rows_.find(row);
  return it == rows_.end() ? nullptr : &it->second;
}

std::vector<std::uint32_t> EmbeddingTable::materialized_rows() const {
  std::vector<std::uint32_t> ids;
  ids.reserve(rows_.size());
  for (const auto& [id, row] : rows_) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

bool EmbeddingTable::operator==(const EmbeddingTable& other) const {
  if (num_rows_ != other.num_rows_ || dim_ != other.dim_ || seed_ != other.seed_ ||
      scale_ != other.scale_) {
    return false;
  }
  std::vector<double> a(dim_), b(dim_);
  auto same_effective = [&](const EmbeddingTable& x, const EmbeddingTable& y) {
    for (const auto& [id, row] : x.rows_) {
      y.read_row(id, b);
      if (row != b) return false;
    }
    return true;
  };
  return same_effective(*this, other) && same_effective(other, *this);
}

DualParams DualParams::init(std::uint32_t num_buckets, std::uint32_t dim, double temperature,
                            std::uint64_t seed) {
  if (num_buckets == 0 || dim == 0) throw usage_error("bad_shape", "buckets and dim must be >= 1");
  if (!(temperature > 0.0)) throw usage_error("bad_temperature");
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  DualParams p;
  p.num_buckets = num_buckets;
  p.dim = dim;
  p.temperature = temperature;
  p.table = EmbeddingTable(num_buckets, dim, derive_seed(seed, "dual.table"), scale);
  Rng rng(derive_seed(seed, "dual.dense"));
  p.empty_row.resize(dim);
  for (auto& v : p.empty_row) v = round_to_float(rng.uniform(-scale, scale));
  p.projection.resize(static_cast<std::size_t>(dim) * dim);
  for (auto& v : p.projection) v = round_to_float(rng.uniform(-scale, scale));
  return p;
}

CrossParams CrossParams::init(std::uint32_t num_buckets, std::uint32_t dim,
                              std::uint32_t hidden_dim, std::uint64_t seed) {
  if (num_buckets == 0 || dim == 0 || hidden_dim == 0) {
    throw usage_error("bad_shape", "buckets, dim and hidden_dim must be >= 1");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  CrossParams p;
  p.num_buckets = num_buckets;
  p.dim = dim;
  p.hidden_dim = hidden_dim;
  p.table = EmbeddingTable(num_buckets, dim, derive_seed(seed, "cross.table"), scale);
  Rng rng(derive_seed(seed, "cross.dense"));
  p.hidden.resize(static_cast<std::size_t>(dim) * hidden_dim);
  for (auto& v : p.hidden) v = round_to_float(rng.uniform(-scale, scale));
  p.hidden_bias.assign(hidden_dim, 0.0);
  p.output.resize(hidden_dim);
  for (auto& v : p.output) v = round_to_float(rng.uniform(-scale, scale));
  p.output_bias = 0.0;
  return p;
}

CrossParams CrossParams::zeros(std::uint32_t num_buckets, std::uint32_t dim,
                               std::uint32_t hidden_dim) {
  CrossParams p;
  p.num_buckets = num_buckets;
  p.dim = dim;
  p.hidden_dim = hidden_dim;
  p.table = EmbeddingTable(num_buckets, dim, 0, 0.0);
  p.hidden.assign(static_cast<std::size_t>(dim) * hidden_dim, 0.0);
  p.hidden_bias.assign(hidden_dim, 0.0);
  p.output.assign(hidden_dim, 0.0);
  p.output_bias = 0.0;
  return p;
}

std::uint64_t fingerprint(const DualParams& params) {
  Hasher hs;
  hs.add(std::uint64_t{1});
  hs.add(static_cast<std::uint64_t>(params.num_buckets));
  hs.add(static_cast<std::uint64_t>(params.dim));
  hs.add(params.temperature);
  hash_table(hs, params.table);
  hs.add(params.empty_row);
  hs.add(params.projection);
  return hs.h;
}

std::uint64_t fingerprint(const CrossParams& params) {
  Hasher hs;
  hs.add(std::uint64_t{2});
  hs.add(static_cast<std::uint64_t>(params.num_buckets));
  hs.add(static_cast<std::uint64_t>(params.dim));
  hs.add(static_cast<std::uint64_t>(params.hidden_dim));
  hash_table(hs, params.table);
  hs.add(params.hidden);
  hs.add(params.hidden_bias);
  hs.add(params.output);
  hs.add(params.output_bias);
  return hs.h;
}

std::string document_text(const Document& doc, const EncoderOptions& options) {
  if (options.include_title && doc.title && !doc.title->empty()) {
    return *doc.title + " " + doc.text;
  }
  return doc.text;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

DualTrace dual_forward(const DualParams& params, FeatureIds features) {
  const std::size_t dim = params.dim;
  DualTrace t;
  t.features = std::move(features);
  t.pooled.assign(dim, 0.0);
  if (t.features.empty()) {
    t.pooled = params.empty_row;
  } else {
    const double inv_total = 1.0 / static_cast<double>(t.features.total());
    for (std::size_t i = 0; i < t.features.size(); ++i) {
      params.table.accumulate_row(t.features.ids[i],
                                  static_cast<double>(t.features.counts[i]) * inv_total, t.pooled);
    }
  }
  t.projected.assign(dim, 0.0);
  for (std::size_t r = 0; r < dim; ++r) {
    const double* prow = params.projection.data() + r * dim;
    double s = 0.0;
    for (std::size_t c = 0; c < dim; ++c) s += prow[c] * t.pooled[c];
    t.projected[r] = s;
  }
  double sq = 0.0;
  for (double v : t.projected) sq += v * v;
  t.norm = std::sqrt(sq);
  check_finite(t.norm, "dual projection norm");
  if (t.norm == 0.0) throw numeric_error("numeric_overflow", "zero-norm embedding");
  t.embedding.values.resize(dim);
  for (std::size_t r = 0; r < dim; ++r) t.embedding.values[r] = t.projected[r] / t.norm;
  return t;
}

Embedding embed(const DualParams& params, std::string_view text, const EncoderOptions& options) {
  return dual_forward(params, featurize(text, params.num_buckets, options.max_len)).embedding;
}

double score_dual(const DualParams& params, const InstructionSlot& instruction, const Query& query,
                  const Document& doc, const EncoderOptions& options) {
  const auto q = embed(params, compose_input(instruction, query), options);
  const auto d = embed(params, document_text(doc, options), options);
  return dot(q.values, d.values);
}

std::string cross_input(const InstructionSlot& instruction, const Query& query, const Document& doc,
                        const EncoderOptions& options) {
  return compose_input(instruction, query) + " " + document_text(doc, options);
}

double logistic(double z) {
  double p;
  if (z >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    p = e / (1.0 + e);
  }
  // Keep the result inside the open interval even when the exponent saturates.
  return std::clamp(p, std::numeric_limits<double>::denorm_min(), 1.0 - 0x1.0p-53);
}

CrossTrace cross_forward(const CrossParams& params, FeatureIds features) {
  const std::size_t dim = params.dim;
  const std::size_t hd = params.hidden_dim;
  CrossTrace t;
  t.features = std::move(features);
  t.pooled.assign(dim, 0.0);
  if (!t.features.empty()) {
    const double inv_total = 1.0 / static_cast<double>(t.features.total());
    for (std::size_t i = 0; i < t.features.size(); ++i) {
      params.table.accumulate_row(t.features.ids[i],
                                  static_cast<double>(t.features.counts[i]) * inv_total, t.pooled);
    }
  }
  t.hidden.assign(hd, 0.0);
  for (std::size_t j = 0; j < hd; ++j) t.hidden[j] = params.hidden_bias[j];
  for (std::size_t k = 0; k < dim; ++k) {
    const double xk = t.pooled[k];
    const double* wrow = params.hidden.data() + k * hd;
    for (std::size_t j = 0; j < hd; ++j) t.hidden[j] += xk * wrow[j];
  }
  double z = params.output_bias;
  for (std::size_t j = 0; j < hd; ++j) {
    t.hidden[j] = std::tanh(t.hidden[j]);
    z += params.output[j] * t.hidden[j];
  }
  check_finite(z, "cross logit");
  t.logit = z;
  t.probability = logistic(z);
  return t;
}

double score_cross(const CrossParams& params, const InstructionSlot& instruction,
                   const Query& query, const Document& doc, const EncoderOptions& options) {
  return cross_forward(params,
                       featurize(cross_input(instruction, query, doc, options), params.num_buckets,
                                 options.max_len))
      .probability;
}

}  // namespace tartan
