#include <gtest/gtest.h>

#include <functional>

#include "nlohmann/json.hpp"
#include "tartan/checkpoint.hpp"
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

Benchmark tiny_benchmark(std::uint64_t seed = 0) {
  SynthSpec spec;
  spec.seed = seed;
  spec.queries_per_task = 20;
  spec.docs_per_task = 60;
  return synthetic_benchmark(spec, 30, 90);
}

ExperimentConfig tiny_config(std::uint64_t seed = 0) {
  ExperimentConfig c;
  c.seed = seed;
  c.num_buckets = 4096;
  c.dim = 8;
  c.hidden_dim = 8;
  c.bootstrap.max_steps = 30;
  c.dual.max_steps = 40;
  c.cross.max_steps = 40;
  c.mining.retrieval_depth = 20;
  c.rerank_depth = 20;
  return c;
}

TEST(Experiment, DefaultUnfollowingPairsAreEveryOtherCorpus) {
  const auto b = tiny_benchmark();
  const ExperimentConfig config;
  const auto partners = uf_partners(config, b.train[1], b.train);
  EXPECT_EQ(partners, (std::vector<std::string>{b.train[0].corpus_id(), b.train[2].corpus_id()}));
}

TEST(Experiment, ExplicitUnfollowingPairs) {
  const auto b = tiny_benchmark();
  ExperimentConfig config;
  config.uf_pairs[b.train[0].id] = {b.train[2].corpus_id()};
  EXPECT_EQ(uf_partners(config, b.train[0], b.train), std::vector<std::string>{b.train[2].corpus_id()});
  config.uf_pairs[b.train[0].id] = {b.train[0].corpus_id()};
  EXPECT_EQ(error_code([&] { uf_partners(config, b.train[0], b.train); }), "uf_same_corpus");
}

TEST(Experiment, UnfollowingToggleEmptiesPools) {
  const auto b = tiny_benchmark();
  auto config = tiny_config();
  const auto reranker = train_bootstrap_reranker(config, b.train);
  const auto with = prepare_training_data(config, b.train, reranker);
  EXPECT_GT(with.unfollowing, 0u);
  for (const auto& inst : with.instances) {
    for (const auto& d : inst.unfollowing_negatives) EXPECT_NE(d.corpus_id, inst.task_id);
  }
  config.use_unfollowing = false;
  const auto without = prepare_training_data(config, b.train, reranker);
  EXPECT_EQ(without.unfollowing, 0u);
  for (const auto& inst : without_unfollowing(with.instances)) {
    EXPECT_TRUE(inst.unfollowing_negatives.empty());
  }
}

TEST(Experiment, TrainingIsDeterministicAcrossThreadSettings) {
  const auto b = tiny_benchmark();
  auto config = tiny_config(5);
  const auto a = train_models(config, b.train);
  config.threads = 3;
  const auto c = train_models(config, b.train);
  EXPECT_EQ(serialize_checkpoint(a.dual), serialize_checkpoint(c.dual));
  EXPECT_EQ(serialize_checkpoint(a.cross), serialize_checkpoint(c.cross));

  const auto r1 = evaluate_pooled(pipeline_system(a.dual, a.cross, true, 20, {}, 1), b.eval,
                                  Metric::ndcg, 10, 1);
  const auto r3 = evaluate_pooled(pipeline_system(c.dual, c.cross, true, 20, {}, 3), b.eval,
                                  Metric::ndcg, 10, 3);
  EXPECT_EQ(report_json(r1), report_json(r3));
}

TEST(Experiment, SeedChangesTheModel) {
  const auto b = tiny_benchmark();
  const auto a = train_models(tiny_config(1), b.train, false);
  const auto c = train_models(tiny_config(2), b.train, false);
  EXPECT_NE(serialize_checkpoint(a.dual), serialize_checkpoint(c.dual));
}

TEST(Experiment, AblationGridHasFourCells) {
  const auto b = tiny_benchmark();
  const auto grid = ablate_instructions(tiny_config(), b);
  ASSERT_EQ(grid.cells.size(), 4u);
  for (const bool tr : {true, false}) {
    for (const bool te : {true, false}) {
      const auto& cell = grid.at(tr, te);
      EXPECT_EQ(cell.report.per_task.size(), 3u);
      EXPECT_LE(cell.report.pooled_avg, cell.report.closed_avg);
    }
  }
  const auto json = nlohmann::json::parse(grid_json(grid));
  ASSERT_EQ(json["cells"].size(), 4u);
  EXPECT_EQ(json["cells"][0]["train_instructions"], true);
  EXPECT_EQ(json["cells"][0]["test_instructions"], true);
  EXPECT_EQ(json["cells"][0]["metric"], "success");
  EXPECT_EQ(grid_json(grid), grid_json(ablate_instructions(tiny_config(), b)));
}

TEST(Experiment, AblationNeedsInstructions) {
  auto b = tiny_benchmark();
  b.eval[1].instructions.clear();
  EXPECT_EQ(error_code([&] { ablate_instructions(tiny_config(), b); }), "missing_instruction");
}

TEST(Experiment, TestInstructionIsTheFirstParaphrase) {
  const auto b = tiny_benchmark();
  const auto slot = test_instruction(b.eval[0], true);
  ASSERT_TRUE(std::holds_alternative<Instruction>(slot));
  EXPECT_EQ(std::get<Instruction>(slot).text, b.eval[0].instructions.front().text);
  EXPECT_TRUE(std::holds_alternative<NoInstruction>(test_instruction(b.eval[0], false)));
}

TEST(Experiment, RejectsBadConfig) {
  auto config = tiny_config();
  config.k = 0;
  EXPECT_EQ(error_code([&] { config.validate(); }), "bad_k");
  config = tiny_config();
  config.dim = 0;
  EXPECT_EQ(error_code([&] { config.validate(); }), "bad_config");
}

}  // namespace
}  // namespace tartan
