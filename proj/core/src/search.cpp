#include "tartan/search.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>

#include "binary.hpp"
#include "tartan/error.hpp"
#include "tartan/io.hpp"
#include "tartan/parallel.hpp"
#include "tartan/rng.hpp"

namespace tartan {

namespace {

constexpr std::string_view kIndexMagic = "TARTIDX1";

struct HitOrder {
  bool operator()(const RankedHit& a, const RankedHit& b) const {
    return ranks_before(a.score, a.doc_id, b.score, b.doc_id);
  }
};

}  // namespace

void finalize_ranking(std::vector<RankedHit>& hits, std::size_t k) {
  std::sort(hits.begin(), hits.end(), HitOrder{});
  if (hits.size() > k) hits.resize(k);
  for (std::size_t i = 0; i < hits.size(); ++i) hits[i].rank = i + 1;
}

DenseIndex build_index(const Corpus& corpus, const DualParams& params,
                       const EncoderOptions& options, std::size_t threads) {
  if (corpus.empty()) throw data_error("empty_corpus", corpus.id());
  DenseIndex index;
  index.dim = params.dim;
  index.params_fingerprint = fingerprint(params);
  index.doc_ids.reserve(corpus.size());
  for (const auto& d : corpus.docs()) index.doc_ids.push_back(d.id);
  index.matrix.assign(corpus.size() * params.dim, 0.0f);
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    const auto e = embed(params, document_text(corpus.docs()[i], options), options);
    float* row = index.matrix.data() + i * params.dim;
    for (std::uint32_t c = 0; c < params.dim; ++c) row[c] = static_cast<float>(e.values[c]);
  });
  return index;
}

double inner_product(std::span<const float> row, std::span<const double> query) {
  double s = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) s += static_cast<double>(row[i]) * query[i];
  return s;
}

std::vector<RankedHit> search_topk(const DenseIndex& index, const Embedding& query, std::size_t k) {
  if (query.values.size() != index.dim) {
    throw data_error("dim_mismatch", std::to_string(query.values.size()) + " vs " +
                                         std::to_string(index.dim));
  }
  if (k == 0) throw usage_error("bad_k", "k must be >= 1");
  // Max-heap under HitOrder keeps the worst retained hit on top.
  std::priority_queue<RankedHit, std::vector<RankedHit>, HitOrder> heap;
  const std::size_t keep = std::min(k, index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const double s = inner_product(index.row(i), query.values);
    if (heap.size() < keep) {
      heap.push(RankedHit{index.doc_ids[i], s, 0});
    } else if (ranks_before(s, index.doc_ids[i], heap.top().score, heap.top().doc_id)) {
      heap.pop();
      heap.push(RankedHit{index.doc_ids[i], s, 0});
    }
  }
  std::vector<RankedHit> hits;
  hits.reserve(heap.size());
  while (!heap.empty()) {
    hits.push_back(heap.top());
    heap.pop();
  }
  finalize_ranking(hits, keep);
  return hits;
}

std::string serialize_index(const DenseIndex& index) {
  detail::ByteWriter w;
  w.raw(kIndexMagic);
  w.u32(static_cast<std::uint32_t>(index.size()));
  w.u32(index.dim);
  for (float v : index.matrix) w.f32(v);
  for (const auto& id : index.doc_ids) w.str(id);
  w.u64(index.params_fingerprint);
  w.u64(fnv1a64(w.bytes()));
  return w.take();
}

DenseIndex deserialize_index(std::string_view bytes) {
  if (bytes.size() < kIndexMagic.size() || bytes.substr(0, kIndexMagic.size()) != kIndexMagic) {
    throw data_error("bad_magic", "index");
  }
  if (bytes.size() < kIndexMagic.size() + 4 + 4 + 8 + 8) throw data_error("truncated_file", "index");
  const auto body = bytes.substr(0, bytes.size() - 8);
  detail::ByteReader tail(bytes.substr(bytes.size() - 8), "index");
  if (fnv1a64(body) != tail.u64()) throw data_error("bad_checksum", "index");
  detail::ByteReader r(body, "index");
  r.raw(kIndexMagic.size());
  DenseIndex index;
  const std::uint32_t n = r.u32();
  index.dim = r.u32();
  const std::size_t cells = static_cast<std::size_t>(n) * index.dim;
  if (r.remaining() < cells * 4) throw data_error("truncated_file", "index");
  index.matrix.resize(cells);
  for (auto& v : index.matrix) v = r.f32();
  index.doc_ids.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) index.doc_ids.push_back(r.str());
  index.params_fingerprint = r.u64();
  if (r.remaining() != 0) throw data_error("trailing_bytes", "index");
  return index;
}

void save_index(const std::filesystem::path& path, const DenseIndex& index) {
  write_file(path, serialize_index(index));
}

DenseIndex load_index(const std::filesystem::path& path) {
  return deserialize_index(read_file(path));
}

Bm25Stats build_bm25(const Corpus& corpus, Bm25Params params, const EncoderOptions& options) {
  Bm25Stats stats;
  stats.params = params;
  stats.doc_ids.reserve(corpus.size());
  std::uint64_t total_len = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& d = corpus.docs()[i];
    stats.doc_ids.push_back(d.id);
    const auto tokens = tokenize(document_text(d, options), SIZE_MAX);
    stats.doc_lengths.push_back(static_cast<std::uint32_t>(tokens.size()));
    total_len += tokens.size();
    std::map<std::string, std::uint32_t> tf;
    for (const auto& t : tokens) ++tf[t];
    for (const auto& [term, count] : tf) {
      ++stats.doc_freq[term];
      stats.postings[term].emplace_back(static_cast<std::uint32_t>(i), count);
    }
  }
  stats.avg_length = corpus.empty() ? 0.0 : static_cast<double>(total_len) / corpus.size();
  return stats;
}

double bm25_idf(std::size_t num_docs, std::size_t doc_freq) {
  const double n = static_cast<double>(num_docs);
  const double df = static_cast<double>(doc_freq);
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::vector<RankedHit> bm25_search(const Bm25Stats& stats, std::string_view query, std::size_t k) {
  if (k == 0) throw usage_error("bad_k", "k must be >= 1");
  std::vector<double> scores(stats.size(), 0.0);
  const auto tokens = tokenize(query, SIZE_MAX);
  const std::set<std::string> terms(tokens.begin(), tokens.end());
  const double k1 = stats.params.k1;
  const double b = stats.params.b;
  for (const auto& term : terms) {
    const auto it = stats.postings.find(term);
    if (it == stats.postings.end()) continue;
    const double idf = bm25_idf(stats.size(), it->second.size());
    for (const auto& [doc, tf_count] : it->second) {
      const double tf = tf_count;
      const double norm = 1.0 - b + b * stats.doc_lengths[doc] / stats.avg_length;
      scores[doc] += idf * (tf * (k1 + 1.0)) / (tf + k1 * norm);
    }
  }
  std::vector<RankedHit> hits;
  hits.reserve(stats.size());
  for (std::size_t i = 0; i < stats.size(); ++i) hits.push_back({stats.doc_ids[i], scores[i], 0});
  const std::size_t keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(),
                    HitOrder{});
  hits.resize(keep);
  finalize_ranking(hits, keep);
  return hits;
}

std::vector<RankedHit> rerank(const CrossParams& cross, const InstructionSlot& instruction,
                              const Query& query, const std::vector<RankedHit>& hits,
                              const Corpus& corpus, const EncoderOptions& options) {
  std::vector<RankedHit> out;
  out.reserve(hits.size());
  for (const auto& h : hits) {
    const Document* doc = corpus.find(h.doc_id);
    if (doc == nullptr) throw data_error("unknown_document", h.doc_id);
    out.push_back({h.doc_id, score_cross(cross, instruction, query, *doc, options), 0});
  }
  finalize_ranking(out, out.size());
  return out;
}

std::vector<RankedHit> pipeline_retrieve(const DualParams& dual, const CrossParams* cross,
                                         const InstructionSlot& instruction, const Query& query,
                                         const DenseIndex& index, const Corpus& corpus,
                                         std::size_t depth, std::size_t k,
                                         const EncoderOptions& options) {
  if (k == 0 || depth < k) throw usage_error("bad_depth", "need depth >= k >= 1");
  const auto q = embed(dual, compose_input(instruction, query), options);
  auto hits = search_topk(index, q, cross == nullptr ? k : depth);
  if (cross != nullptr) hits = rerank(*cross, instruction, query, hits, corpus, options);
  finalize_ranking(hits, k);
  return hits;
}

void write_trec_run(std::ostream& out, const std::string& query_id,
                    const std::vector<RankedHit>& hits, const std::string& tag) {
  char buf[64];
  for (const auto& h : hits) {
    std::snprintf(buf, sizeof(buf), "%.17g", h.score);
    out << query_id << " Q0 " << h.doc_id << ' ' << h.rank << ' ' << buf << ' ' << tag << '\n';
  }
}

std::map<std::string, std::vector<RankedHit>> read_trec_run(std::istream& in) {
  std::map<std::string, std::vector<RankedHit>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string qid, q0, doc, tag;
    std::size_t rank = 0;
    double score = 0.0;
    if (!(fields >> qid >> q0 >> doc >> rank >> score >> tag)) {
      throw data_error("bad_run", "line " + std::to_string(line_no));
    }
    out[qid].push_back({doc, score, rank});
  }
  return out;
}

}  // namespace tartan
