#include <gtest/gtest.h>

#include <functional>
#include <set>

#include "tartan/error.hpp"
#include "tartan/experiment.hpp"
#include "tartan/synth.hpp"

namespace tartan {
namespace {

std::string error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

SynthSpec small_spec(std::uint64_t seed = 0) {
  SynthSpec s;
  s.seed = seed;
  s.queries_per_task = 50;
  s.docs_per_task = 200;
  return s;
}

std::set<std::string> query_texts(const Task& t) {
  std::set<std::string> out;
  for (const auto& q : t.queries) out.insert(q.text);
  return out;
}

TEST(Synth, DeterministicAndValid) {
  const auto a = generate_benchmark(small_spec(3));
  EXPECT_EQ(a, generate_benchmark(small_spec(3)));
  EXPECT_NE(a, generate_benchmark(small_spec(4)));
  ASSERT_EQ(a.size(), 3u);
  for (const auto& t : a) {
    EXPECT_TRUE(validate_task(t).ok()) << t.id;
    EXPECT_EQ(t.corpus.size(), 200u);
    EXPECT_EQ(t.queries.size(), 50u);
    EXPECT_EQ(t.instructions.size(), 3u);
    for (const auto& q : t.queries) EXPECT_EQ(t.qrels.positives(q.id).size(), 1u);
  }
  EXPECT_EQ(a[0].id, "t0_answer");
  EXPECT_EQ(a[1].id, "t1_duplicate_question");
  EXPECT_EQ(a[2].id, "t2_summary");
}

TEST(Synth, OverlapZeroSharesNoQueryText) {
  auto spec = small_spec();
  spec.overlap_fraction = 0.0;
  const auto tasks = generate_benchmark(spec);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    for (std::size_t j = i + 1; j < tasks.size(); ++j) {
      const auto a = query_texts(tasks[i]);
      for (const auto& q : query_texts(tasks[j])) EXPECT_FALSE(a.contains(q));
    }
  }
}

TEST(Synth, OverlapFractionSetsSharedQueryCount) {
  for (const double f : {0.2, 0.5, 0.8, 1.0}) {
    auto spec = small_spec();
    spec.overlap_fraction = f;
    const auto tasks = generate_benchmark(spec);
    auto shared = query_texts(tasks[0]);
    for (const auto& t : tasks) {
      const auto mine = query_texts(t);
      std::erase_if(shared, [&](const std::string& q) { return !mine.contains(q); });
    }
    EXPECT_EQ(shared.size(), static_cast<std::size_t>(std::llround(f * 50))) << f;
  }
}

TEST(Synth, InstructionsCarryFacetsButNoMarkers) {
  const auto tasks = generate_benchmark(small_spec());
  for (const auto& t : tasks) {
    std::set<std::string> doc_tokens;
    for (const auto& d : t.corpus.docs()) {
      for (const auto& tok : tokenize(d.text)) {
        if (tok[0] != 'w') doc_tokens.insert(tok);
      }
    }
    for (const auto& ins : t.instructions) {
      EXPECT_FALSE(ins.intent.empty() || ins.domain.empty() || ins.unit.empty());
      EXPECT_EQ(ins.paraphrase_group, t.id);
      for (const auto& tok : tokenize(ins.text)) EXPECT_FALSE(doc_tokens.contains(tok)) << tok;
    }
  }
}

TEST(Synth, BlindScorerCannotBeatHalfOnSymmetricFullOverlap) {
  auto spec = small_spec(5);
  spec.n_tasks = 2;
  spec.overlap_fraction = 1.0;
  spec.intent_kinds = {IntentKind::answer, IntentKind::answer};
  const auto tasks = generate_benchmark(spec);
  const auto report = evaluate_pooled(bm25_system({}, false), tasks, Metric::success, 1);
  EXPECT_LE(report.pooled_avg, 0.5);
}

TEST(Synth, LexicalBaselineDegradesWithOverlap) {
  double previous = 2.0;
  for (const double f : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    auto spec = small_spec(6);
    spec.overlap_fraction = f;
    const auto report = evaluate_pooled(bm25_system({}, false), generate_benchmark(spec), Metric::success, 1);
    EXPECT_LE(report.pooled_avg, previous) << f;
    previous = report.pooled_avg;
  }
}

TEST(Synth, RejectsBadSpecs) {
  auto s = small_spec();
  s.overlap_fraction = 1.5;
  EXPECT_EQ(error_code([&] { generate_benchmark(s); }), "bad_spec");
  s = small_spec();
  s.docs_per_task = 10;
  EXPECT_EQ(error_code([&] { generate_benchmark(s); }), "bad_spec");
  s = small_spec();
  s.instructions_per_task = 9;
  EXPECT_EQ(error_code([&] { generate_benchmark(s); }), "bad_spec");
  s = small_spec();
  s.vocab_size = 7;
  s.filler_perturbation = 2;
  EXPECT_EQ(error_code([&] { generate_benchmark(s); }), "vocab_exhausted");
  EXPECT_EQ(parse_intent_kind("code"), IntentKind::code);
  EXPECT_EQ(error_code([] { parse_intent_kind("poem"); }), "unknown_intent_kind");
}

TEST(Synth, TrainingSplitIsIndependentOfEvalSplit) {
  const auto b = synthetic_benchmark(small_spec(2), 80, 300);
  ASSERT_EQ(b.train.size(), 3u);
  EXPECT_EQ(b.train[0].queries.size(), 80u);
  EXPECT_EQ(b.train[0].corpus.size(), 300u);
  EXPECT_EQ(b.eval, generate_benchmark(small_spec(2)));
  std::size_t common = 0;
  const auto eval_q = query_texts(b.eval[0]);
  for (const auto& q : query_texts(b.train[0])) common += eval_q.contains(q) ? 1 : 0;
  EXPECT_LE(common, 1u);
}

}  // namespace
}  // namespace tartan
