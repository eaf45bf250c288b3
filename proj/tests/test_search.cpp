#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "oracles.hpp"
#include "tartan/error.hpp"

namespace tartan {
namespace {

TEST(Bm25, SingleDocumentHandCase) {
  const auto stats = build_bm25(oracle::make_corpus("c", {"a a b"}), Bm25Params{0.9, 0.4});
  const auto hits = bm25_search(stats, "a", 10);
  ASSERT_EQ(hits.size(), 1u);
  const double hand = std::log(1.0 + 0.5 / 1.5) * (2.0 * 1.9) / (2.0 + 0.9 * 1.0);
  EXPECT_NEAR(hits[0].score, hand, 1e-12);
  EXPECT_NEAR(hits[0].score, 0.3769, 1e-4);
}

TEST(Bm25, MatchesOkapiOracleOnRandomCorpora) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::string> texts;
    const std::size_t n = 1 + rng.below(30);
    for (std::size_t i = 0; i < n; ++i) texts.push_back(oracle::random_text(rng, 1, 12, 15));
    const Bm25Params p{0.5 + rng.uniform(), rng.uniform()};
    const auto corpus = oracle::make_corpus("c", texts);
    const auto stats = build_bm25(corpus, p);
    const std::string query = oracle::random_text(rng, 1, 4, 15);

    std::vector<std::vector<std::string>> toks;
    double total = 0.0;
    for (const auto& t : texts) {
      toks.push_back(tokenize(t));
      total += static_cast<double>(toks.back().size());
    }
    const double avg = total / static_cast<double>(n);
    std::map<std::string, double> expected;
    for (std::size_t d = 0; d < n; ++d) {
      double s = 0.0;
      const auto qt = tokenize(query);
      for (const auto& term : std::set<std::string>(qt.begin(), qt.end())) {
        double df = 0.0;
        for (const auto& doc : toks) df += std::count(doc.begin(), doc.end(), term) > 0 ? 1.0 : 0.0;
        const double tf = static_cast<double>(std::count(toks[d].begin(), toks[d].end(), term));
        if (tf == 0.0) continue;
        s += oracle::bm25_term(static_cast<double>(n), df, tf, static_cast<double>(toks[d].size()), avg,
                               p.k1, p.b);
      }
      expected["d" + std::to_string(d)] = s;
    }
    const auto hits = bm25_search(stats, query, n);
    ASSERT_EQ(hits.size(), expected.size());
    for (std::size_t i = 0; i < hits.size(); ++i) {
      EXPECT_NEAR(hits[i].score, expected.at(hits[i].doc_id), 1e-12);
      if (i > 0) EXPECT_TRUE(ranks_before(hits[i - 1].score, hits[i - 1].doc_id, hits[i].score, hits[i].doc_id));
    }
  }
}

TEST(Bm25, IdfFormula) {
  EXPECT_NEAR(bm25_idf(10, 2), std::log(1.0 + 8.5 / 2.5), 1e-15);
  EXPECT_GT(bm25_idf(10, 10), 0.0);
}

TEST(SearchTopk, EqualsSortEverythingOracleIncludingTies) {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(500);
    const auto dim = static_cast<std::uint32_t>(1 + rng.below(16));
    const bool quantized = trial % 2 == 0;
    const auto index = oracle::random_index(rng, n, dim, quantized);
    Embedding q;
    for (std::uint32_t j = 0; j < dim; ++j) {
      q.values.push_back(quantized ? static_cast<double>(static_cast<int>(rng.below(3)) - 1)
                                   : rng.uniform(-1.0, 1.0));
    }
    const std::size_t k = 1 + rng.below(50);
    const auto hits = search_topk(index, q, k);
    const auto expected = oracle::topk(index, q.values, k);
    ASSERT_EQ(hits.size(), expected.size()) << "trial " << trial;
    for (std::size_t i = 0; i < hits.size(); ++i) {
      EXPECT_EQ(hits[i].doc_id, expected[i].first) << "trial " << trial << " rank " << i + 1;
      EXPECT_EQ(hits[i].score, expected[i].second);
      EXPECT_EQ(hits[i].rank, i + 1);
    }
  }
}

TEST(SearchTopk, AllTiedBreaksByIdAscending) {
  DenseIndex index;
  index.dim = 2;
  for (const char* id : {"b", "c", "a", "aa"}) {
    index.doc_ids.emplace_back(id);
    index.matrix.insert(index.matrix.end(), {1.0F, 0.0F});
  }
  const auto hits = search_topk(index, Embedding{{1.0, 0.0}}, 3);
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_EQ(hits[0].doc_id, "a");
  EXPECT_EQ(hits[1].doc_id, "aa");
  EXPECT_EQ(hits[2].doc_id, "b");
}

TEST(SearchTopk, RejectsDimensionMismatchAndZeroK) {
  DenseIndex index;
  index.dim = 2;
  index.doc_ids = {"a"};
  index.matrix = {1.0F, 0.0F};
  try {
    search_topk(index, Embedding{{1.0}}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "dim_mismatch");
  }
  EXPECT_THROW(search_topk(index, Embedding{{1.0, 0.0}}, 0), Error);
}

TEST(DenseIndexTest, BuildIsThreadIndependentAndRoundTrips) {
  Rng rng(5);
  std::vector<std::string> texts;
  for (int i = 0; i < 40; ++i) texts.push_back(oracle::random_text(rng, 1, 10));
  const auto corpus = oracle::make_corpus("c", texts);
  const auto params = DualParams::init(4096, 8, 0.05, 9);
  const auto one = build_index(corpus, params, {}, 1);
  const auto four = build_index(corpus, params, {}, 4);
  EXPECT_EQ(serialize_index(one), serialize_index(four));
  EXPECT_EQ(one.params_fingerprint, fingerprint(params));
  const auto bytes = serialize_index(one);
  EXPECT_EQ(deserialize_index(bytes), one);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto e = embed(params, document_text(corpus.docs()[i]));
    for (std::uint32_t j = 0; j < 8; ++j) EXPECT_EQ(one.row(i)[j], static_cast<float>(e.values[j]));
  }
}

TEST(DenseIndexTest, CorruptedBytesAreRejected) {
  const auto corpus = oracle::make_corpus("c", {"x y", "z"});
  const auto bytes = serialize_index(build_index(corpus, DualParams::init(1024, 4, 0.05, 1)));
  EXPECT_THROW(deserialize_index(bytes.substr(0, bytes.size() - 3)), Error);
  EXPECT_THROW(deserialize_index("XXXXXXXX" + bytes.substr(8)), Error);
  EXPECT_THROW(deserialize_index(bytes + "extra"), Error);
  // Every single-byte flip, including inside the float matrix and the ids.
  for (std::size_t i = 8; i < bytes.size(); ++i) {
    std::string bad = bytes;
    bad[i] ^= 0x01;
    EXPECT_THROW(deserialize_index(bad), Error) << "byte " << i;
  }
  EXPECT_THROW(build_index(Corpus("empty"), DualParams::init(1024, 4, 0.05, 1)), Error);
}

TEST(Pipeline, WithoutCrossEqualsFirstStage) {
  Rng rng(8);
  std::vector<std::string> texts;
  for (int i = 0; i < 60; ++i) texts.push_back(oracle::random_text(rng, 2, 8));
  const auto corpus = oracle::make_corpus("c", texts);
  const auto dual = DualParams::init(4096, 8, 0.05, 3);
  const auto index = build_index(corpus, dual);
  const Query q{"q", texts[7], "t"};
  const auto first = search_topk(index, embed(dual, q.text), 10);
  EXPECT_EQ(pipeline_retrieve(dual, nullptr, NoInstruction{}, q, index, corpus, 30, 10), first);
}

TEST(Pipeline, RerankKeepsCandidatesAndOrdersByCrossScore) {
  Rng rng(9);
  std::vector<std::string> texts;
  for (int i = 0; i < 60; ++i) texts.push_back(oracle::random_text(rng, 2, 8));
  const auto corpus = oracle::make_corpus("c", texts);
  const auto dual = DualParams::init(4096, 8, 0.05, 3);
  const auto cross = CrossParams::init(4096, 8, 4, 4);
  const auto index = build_index(corpus, dual);
  const Query q{"q", texts[3], "t"};
  const auto depth = search_topk(index, embed(dual, q.text), 20);
  const auto out = pipeline_retrieve(dual, &cross, NoInstruction{}, q, index, corpus, 20, 20);
  ASSERT_EQ(out.size(), depth.size());
  std::set<std::string> a, b;
  for (const auto& h : depth) a.insert(h.doc_id);
  for (const auto& h : out) b.insert(h.doc_id);
  EXPECT_EQ(a, b);
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_DOUBLE_EQ(out[i].score, score_cross(cross, NoInstruction{}, q, *corpus.find(out[i].doc_id)));
    if (i > 0) EXPECT_TRUE(ranks_before(out[i - 1].score, out[i - 1].doc_id, out[i].score, out[i].doc_id));
  }
  const auto top5 = pipeline_retrieve(dual, &cross, NoInstruction{}, q, index, corpus, 20, 5);
  EXPECT_EQ(std::vector<RankedHit>(out.begin(), out.begin() + 5), top5);
}

TEST(TrecRun, WriteThenReadRoundTrips) {
  std::vector<RankedHit> hits = {{"d1", 0.5, 1}, {"d2", 0.25, 2}};
  std::ostringstream out;
  write_trec_run(out, "q1", hits, "tag");
  std::istringstream in(out.str());
  const auto runs = read_trec_run(in);
  ASSERT_EQ(runs.count("q1"), 1u);
  ASSERT_EQ(runs.at("q1").size(), 2u);
  EXPECT_EQ(runs.at("q1")[1].doc_id, "d2");
  EXPECT_EQ(runs.at("q1")[1].rank, 2u);
  std::istringstream bad("q1 Q0 d1 notarank 0.5 tag\n");
  EXPECT_THROW(read_trec_run(bad), Error);
}

}  // namespace
}  // namespace tartan
