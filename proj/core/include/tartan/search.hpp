#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tartan/encoder.hpp"
#include "tartan/schema.hpp"

namespace tartan {

struct RankedHit {
  std::string doc_id;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based

  bool operator==(const RankedHit&) const = default;
};

// The single ordering used everywhere: score descending, then doc id
// ascending (bytewise).
inline bool ranks_before(double score_a, std::string_view id_a, double score_b,
                         std::string_view id_b) {
  if (score_a != score_b) return score_a > score_b;
  return id_a < id_b;
}

// Sorts by the tie rule, assigns ranks 1..n and truncates to k.
void finalize_ranking(std::vector<RankedHit>& hits, std::size_t k);

struct DenseIndex {
  std::vector<std::string> doc_ids;
  std::uint32_t dim = 0;
  std::vector<float> matrix;  // doc_ids.size() x dim, row-major
  std::uint64_t params_fingerprint = 0;

  std::size_t size() const { return doc_ids.size(); }
  std::span<const float> row(std::size_t i) const {
    return {matrix.data() + i * dim, static_cast<std::size_t>(dim)};
  }

  bool operator==(const DenseIndex&) const = default;
};

// Embeds every document in corpus order. Throws "empty_corpus".
DenseIndex build_index(const Corpus& corpus, const DualParams& params,
                       const EncoderOptions& options = {}, std::size_t threads = 1);

double inner_product(std::span<const float> row, std::span<const double> query);

// Exact top-k by inner product over a full scan. Throws "dim_mismatch".
std::vector<RankedHit> search_topk(const DenseIndex& index, const Embedding& query, std::size_t k);

// Index file: "TARTIDX1", u32 N, u32 dim, N*dim f32 rows, N length-prefixed
// (u32) UTF-8 ids, u64 params fingerprint, u64 fnv1a64 of every preceding
// byte. All little-endian.
std::string serialize_index(const DenseIndex& index);
DenseIndex deserialize_index(std::string_view bytes);
void save_index(const std::filesystem::path& path, const DenseIndex& index);
DenseIndex load_index(const std::filesystem::path& path);

struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;
};

// Okapi BM25 statistics with an inverted file.
struct Bm25Stats {
  Bm25Params params;
  std::vector<std::string> doc_ids;
  std::vector<std::uint32_t> doc_lengths;
  double avg_length = 0.0;
  std::unordered_map<std::string, std::uint32_t> doc_freq;
  // term -> (doc index, term frequency), doc index ascending
  std::unordered_map<std::string, std::vector<std::pair<std::uint32_t, std::uint32_t>>> postings;

  std::size_t size() const { return doc_ids.size(); }
};

Bm25Stats build_bm25(const Corpus& corpus, Bm25Params params = {},
                     const EncoderOptions& options = {});

// idf = ln(1 + (N - df + 0.5) / (df + 0.5))
double bm25_idf(std::size_t num_docs, std::size_t doc_freq);

std::vector<RankedHit> bm25_search(const Bm25Stats& stats, std::string_view query, std::size_t k);

// Rescores every hit with the cross encoder and re-sorts. The candidate set
// is unchanged; ranks are reassigned.
std::vector<RankedHit> rerank(const CrossParams& cross, const InstructionSlot& instruction,
                              const Query& query, const std::vector<RankedHit>& hits,
                              const Corpus& corpus, const EncoderOptions& options = {});

// First stage: instruction-conditioned dense search for `depth` candidates.
// Second stage (when cross is non-null): rerank them. Returns the top k.
std::vector<RankedHit> pipeline_retrieve(const DualParams& dual, const CrossParams* cross,
                                         const InstructionSlot& instruction, const Query& query,
                                         const DenseIndex& index, const Corpus& corpus,
                                         std::size_t depth = 100, std::size_t k = 10,
                                         const EncoderOptions& options = {});

// TREC run lines: "qid Q0 docid rank score tag".
void write_trec_run(std::ostream& out, const std::string& query_id,
                    const std::vector<RankedHit>& hits, const std::string& tag);

// Parses TREC run lines back into per-query hit lists (file order kept).
// Throws "bad_run" on malformed lines.
std::map<std::string, std::vector<RankedHit>> read_trec_run(std::istream& in);

}  // namespace tartan
