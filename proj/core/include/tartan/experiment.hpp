#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tartan/encoder.hpp"
#include "tartan/evaluation.hpp"
#include "tartan/mining.hpp"
#include "tartan/schema.hpp"
#include "tartan/search.hpp"
#include "tartan/synth.hpp"
#include "tartan/training.hpp"

namespace tartan {

// Everything an end-to-end run needs. Sub-seeds are derived from `seed`
// by label ("mine", "bootstrap", "dual", "cross", ...), so one number pins the run.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  std::uint32_t num_buckets = kDefaultBuckets;
  std::uint32_t dim = kDefaultDim;
  std::uint32_t hidden_dim = kDefaultHiddenDim;
  EncoderOptions encoder;

  MiningConfig mining;
  Bm25Params bm25;
  bool use_hard_negatives = true;
  bool use_unfollowing = true;
  std::size_t random_pool_size = 0;
  // task id -> foreign corpus ids used for unfollowing negatives. Tasks not
  // listed pair with every other task's corpus.
  std::map<std::string, std::vector<std::string>> uf_pairs;

  TrainConfig bootstrap;  // instruction-free reranker used to denoise mined negatives
  TrainConfig dual;
  TrainConfig cross;
  DistillConfig distill;

  std::size_t rerank_depth = 100;
  Metric metric = Metric::success;
  std::size_t k = 5;

  ExperimentConfig();
  void validate() const;
};

struct Benchmark {
  std::vector<Task> train;
  std::vector<Task> eval;
};

// Foreign corpora paired with a task under config.uf_pairs.
std::vector<std::string> uf_partners(const ExperimentConfig& config, const Task& task,
                                     const std::vector<Task>& tasks);

// Cross encoder trained without instructions on gold positives and random
// negatives; stands in for an off-the-shelf reranker during mining.
CrossParams train_bootstrap_reranker(const ExperimentConfig& config, const std::vector<Task>& tasks);

struct PreparedData {
  std::vector<TrainingInstance> instances;
  MiningReport hard_report;
  std::size_t unfollowing = 0;  // mined unfollowing candidates over all instances
};

// Mines denoised hard negatives (BM25 retriever + the given reranker) and
// unfollowing negatives (BM25 over the paired foreign corpora), honoring the
// use_hard_negatives / use_unfollowing toggles.
PreparedData prepare_training_data(const ExperimentConfig& config, const std::vector<Task>& tasks,
                                   const CrossParams& reranker);

struct TrainedModels {
  DualParams dual;
  CrossParams cross;
  PreparedData data;
};

// Dual encoder trained from the config's dual settings and seeds.
DualParams train_dual_on(const ExperimentConfig& config, const std::vector<Task>& tasks,
                         const std::vector<TrainingInstance>& instances);

// Same instances with every unfollowing pool emptied.
std::vector<TrainingInstance> without_unfollowing(std::vector<TrainingInstance> instances);

// Bootstrap reranker, mining, then dual (and, if train_cross, cross) training
// with config.dual.use_instructions / config.cross.use_instructions.
TrainedModels train_models(const ExperimentConfig& config, const std::vector<Task>& tasks,
                           bool train_cross = true);

// Instruction-conditioned (or not) dense retrieval over a corpus.
RetrievalSystem dense_system(const DualParams& dual, bool use_instructions,
                             const EncoderOptions& options = {}, std::size_t threads = 1);
// Dense first stage followed by cross-encoder reranking of the top `depth`.
RetrievalSystem pipeline_system(const DualParams& dual, const CrossParams& cross,
                                bool use_instructions, std::size_t depth,
                                const EncoderOptions& options = {}, std::size_t threads = 1);
RetrievalSystem bm25_system(Bm25Params params, bool use_instructions);

// Instruction used for a task at test time: its first instruction.
InstructionSlot test_instruction(const Task& task, bool use_instructions);

struct AblationCell {
  bool train_instructions = false;
  bool test_instructions = false;
  RunReport report;
};

struct AblationGrid {
  std::vector<AblationCell> cells;  // (+,+), (+,-), (-,+), (-,-)

  const AblationCell& at(bool train_instructions, bool test_instructions) const;
};

// Trains a dual encoder with and without instructions on benchmark.train and
// evaluates each with and without instructions on benchmark.eval (pooled).
AblationGrid ablate_instructions(const ExperimentConfig& config, const Benchmark& benchmark);

// Eval tasks from eval_spec; training tasks drawn independently from the same
// spec under a derived seed, at the given sizes.
Benchmark synthetic_benchmark(const SynthSpec& eval_spec, std::size_t train_queries_per_task,
                              std::size_t train_docs_per_task);

std::string grid_json(const AblationGrid& grid);

}  // namespace tartan
