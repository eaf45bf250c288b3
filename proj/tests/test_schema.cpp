#include <gtest/gtest.h>

#include <functional>
#include <set>

#include "tartan/error.hpp"
#include "tartan/schema.hpp"

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

Task three_doc_task() {
  Task t;
  t.id = "t";
  t.corpus = Corpus("t", {{"a", std::nullopt, "alpha", "t"}, {"b", "Bee", "beta", "t"}, {"c", std::nullopt, "gamma", "t"}});
  t.queries = {{"q1", "what is alpha", "t"}};
  t.qrels.set("q1", "a", 1);
  t.instructions = {{"Retrieve a paragraph", "answer", "wiki", "paragraph", "g"}};
  return t;
}

TEST(ComposeInput, JoinsWithSingleSpace) {
  const Instruction t{"Retrieve a Wikipedia paragraph that answers this question.", "answer", "wiki", "paragraph", ""};
  EXPECT_EQ(compose_input(t, "who wrote hamlet"),
            "Retrieve a Wikipedia paragraph that answers this question. who wrote hamlet");
  EXPECT_EQ(compose_input(NoInstruction{}, "who wrote hamlet"), "who wrote hamlet");
  EXPECT_TRUE(has_instruction(InstructionSlot{t}));
  EXPECT_FALSE(has_instruction(InstructionSlot{NoInstruction{}}));
}

TEST(ComposeInput, InjectiveOnSingleWordTexts) {
  const std::vector<std::string> texts = {"a", "b", "ab", "ba", "abc", "find"};
  std::set<std::string> seen;
  for (const auto& t : texts) {
    for (const auto& q : texts) seen.insert(compose_input(Instruction{t, "i", "d", "u", ""}, q));
  }
  EXPECT_EQ(seen.size(), texts.size() * texts.size());
}

TEST(Unify, BijectiveSummarizationPairs) {
  const auto t = unify_dataset({{"long text one", "sum one"}, {"long text two", "sum two"}},
                               UnificationRule::summarization_target_as_gold, "sum");
  EXPECT_EQ(t.corpus.size(), 2u);
  EXPECT_EQ(t.queries.size(), 2u);
  EXPECT_EQ(t.qrels.size(), 2u);
  EXPECT_TRUE(validate_task(t).ok());
}

TEST(Unify, SharedTargetsAreDeduplicated) {
  const auto t = unify_dataset({{"q one", "same"}, {"q two", "same"}}, UnificationRule::qa_context_as_gold);
  ASSERT_EQ(t.corpus.size(), 1u);
  const auto id = t.corpus.docs()[0].id;
  EXPECT_EQ(t.qrels.positives(t.queries[0].id), std::vector<std::string>{id});
  EXPECT_EQ(t.qrels.positives(t.queries[1].id), std::vector<std::string>{id});
}

TEST(Unify, CodeRuleUsesCommentAsQuery) {
  const auto t = unify_dataset({{"sort a list", "def s(x): return sorted(x)"}}, UnificationRule::code_comment_as_query);
  EXPECT_EQ(t.queries[0].text, "sort a list");
  EXPECT_EQ(t.corpus.docs()[0].text, "def s(x): return sorted(x)");
  EXPECT_EQ(t.instructions.size(), 1u);
  EXPECT_TRUE(validate_task(t).ok());
}

TEST(Unify, RejectsEmptyInput) {
  EXPECT_EQ(error_code([] { unify_dataset({}, UnificationRule::qa_context_as_gold); }), "empty_pairs");
  try {
    unify_dataset({{"ok", "ok"}, {"", "x"}}, UnificationRule::qa_context_as_gold);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "empty_pair_side");
    EXPECT_NE(std::string(e.what()).find('1'), std::string::npos);
  }
}

TEST(Unify, EveryRuleHasNameAndInstruction) {
  for (const auto rule : {UnificationRule::qa_context_as_gold, UnificationRule::summarization_target_as_gold,
                          UnificationRule::simplification_target_as_gold, UnificationRule::code_comment_as_query,
                          UnificationRule::question_duplicate_as_gold}) {
    EXPECT_EQ(parse_unification_rule(to_string(rule)), rule);
    const auto ins = default_instruction(rule);
    EXPECT_FALSE(ins.text.empty());
    EXPECT_FALSE(ins.intent.empty() || ins.domain.empty() || ins.unit.empty());
  }
  EXPECT_FALSE(parse_unification_rule("nope").has_value());
}

TEST(ValidateTask, ReportsEachViolation) {
  EXPECT_TRUE(validate_task(three_doc_task()).ok());
  auto t = three_doc_task();
  t.instructions.clear();
  EXPECT_TRUE(validate_task(t).has("missing_instruction"));
  t = three_doc_task();
  t.qrels.set("q1", "zzz", 1);
  EXPECT_TRUE(validate_task(t).has("dangling_qrel"));
  t = three_doc_task();
  t.queries.push_back({"q2", "no gold", "t"});
  EXPECT_TRUE(validate_task(t).has("query_without_positive"));
  t = three_doc_task();
  t.instructions[0].unit.clear();
  EXPECT_TRUE(validate_task(t).has("missing_facet"));
}

TEST(ValidateInstance, FlagsPositiveOverlapAndSameCorpusUnfollowing) {
  const auto t = three_doc_task();
  TrainingInstance inst{"t", "q1", {"a"}, {"b"}, {{"other", "x"}}, {"c"}};
  EXPECT_TRUE(validate_instance(inst, t).ok());
  inst.hard_negatives.push_back("a");
  EXPECT_TRUE(validate_instance(inst, t).has("positive_in_negatives"));
  inst = {"t", "q1", {"a"}, {}, {{"t", "b"}}, {}};
  EXPECT_TRUE(validate_instance(inst, t).has("unfollowing_same_corpus"));
}

TEST(CorpusTest, RejectsDuplicateIdsAndKeepsOrder) {
  Corpus c("c");
  EXPECT_TRUE(c.add({"b", std::nullopt, "x", "c"}));
  EXPECT_TRUE(c.add({"a", std::nullopt, "y", "c"}));
  EXPECT_FALSE(c.add({"a", std::nullopt, "z", "c"}));
  EXPECT_EQ(c.size(), 2u);
  EXPECT_EQ(c.docs()[0].id, "b");
  EXPECT_EQ(c.find("a")->text, "y");
  EXPECT_EQ(c.find("missing"), nullptr);
}

}  // namespace
}  // namespace tartan
