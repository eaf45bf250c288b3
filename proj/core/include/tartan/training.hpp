#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "tartan/encoder.hpp"
#include "tartan/mining.hpp"
#include "tartan/schema.hpp"

namespace tartan {

// Read-only view over a set of tasks: id lookup for tasks and corpora.
class TaskSet {
 public:
  TaskSet() = default;
  explicit TaskSet(const std::vector<Task>& tasks);

  const Task& task(const std::string& task_id) const;
  const Task* find_task(const std::string& task_id) const;
  const Corpus& corpus(const std::string& corpus_id) const;
  const Document& doc(const DocKey& key) const;

 private:
  std::map<std::string, const Task*, std::less<>> tasks_;
  std::map<std::string, const Corpus*, std::less<>> corpora_;
};

struct DualItem {
  InstructionSlot instruction;
  Query query;
  Document positive;
  std::vector<Document> negatives;
};

// Every document of the batch (all positives and explicit negatives,
// deduplicated by corpus and id) forms the shared softmax pool.
struct DualBatch {
  std::vector<DualItem> items;
};

struct CrossItem {
  InstructionSlot instruction;
  Query query;
  Document doc;
  int label = 0;  // 0 or 1
};

struct CrossBatch {
  std::vector<CrossItem> items;
};

// Gradients shaped like the parameters; table rows are sparse.
struct DualGrads {
  std::unordered_map<std::uint32_t, std::vector<double>> table;
  std::vector<double> empty_row;
  std::vector<double> projection;

  double table_at(std::uint32_t row, std::uint32_t col) const;
};

struct CrossGrads {
  std::unordered_map<std::uint32_t, std::vector<double>> table;
  std::vector<double> hidden;
  std::vector<double> hidden_bias;
  std::vector<double> output;
  double output_bias = 0.0;

  double table_at(std::uint32_t row, std::uint32_t col) const;
};

struct DualLossGrad {
  double loss = 0.0;
  DualGrads grads;
};

struct CrossLossGrad {
  double loss = 0.0;
  CrossGrads grads;
};

// Mean over items of -log softmax_{pool}(s / tau)[positive]. Throws
// "conflicting_labels" if an item lists its own positive as a negative.
DualLossGrad dual_loss_grad(const DualParams& params, const DualBatch& batch,
                            const EncoderOptions& options = {});

// Mean binary cross-entropy; probabilities are clamped to [1e-12, 1 - 1e-12]
// before the logarithm (zero gradient where the clamp is active).
CrossLossGrad cross_loss_grad(const CrossParams& params, const CrossBatch& batch,
                              const EncoderOptions& options = {});

inline constexpr double kProbabilityClamp = 1e-12;

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t negatives_per_positive = 5;  // dual encoder
  double hard_or_uf_fraction = 0.1;
  std::size_t pos_neg_ratio_cross = 4;  // negatives per positive for the cross encoder
  double learning_rate = 1e-3;
  std::size_t warmup_steps = 100;
  std::size_t max_steps = 1000;
  std::uint64_t seed = 0;
  double temperature = kDefaultTemperature;
  bool use_instructions = true;
  // Fill each batch from a single task so in-batch negatives share a corpus.
  bool task_homogeneous_batches = true;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  MiningConfig sampling;  // unfollowing caps used when drawing negatives

  void validate() const;
};

struct TrainLogEntry {
  std::size_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

template <typename Params>
struct TrainResult {
  Params params;
  std::vector<TrainLogEntry> log;
  std::size_t skipped_instances = 0;  // instances with no positives
};

double learning_rate_at(const TrainConfig& config, std::size_t step);

TrainResult<DualParams> train_dual(DualParams init, const TrainConfig& config,
                                   const std::vector<TrainingInstance>& data, const TaskSet& tasks,
                                   const EncoderOptions& options = {});

TrainResult<CrossParams> train_cross(CrossParams init, const TrainConfig& config,
                                     const std::vector<TrainingInstance>& data,
                                     const TaskSet& tasks, const EncoderOptions& options = {});

// {"step": int, "loss": float, "lr": float} per line.
void write_train_log(std::ostream& out, const std::vector<TrainLogEntry>& log);

struct DistillConfig {
  double threshold = 0.1;          // below: move to hard negatives
  double promote_threshold = 0.9;  // above: promote to positives
};

struct DistillReport {
  std::size_t moved_to_hard = 0;
  std::size_t promoted = 0;
  std::vector<std::string> flagged;  // "task/query" left unchanged (would lose all positives)
};

// Extra candidates to rescore per instance (e.g. fresh retrieval results),
// in addition to the instance's positives and hard negatives.
using CandidateFn = std::function<std::vector<std::string>(const TrainingInstance&)>;

// Relabels positives and hard negatives with an instruction-aware cross
// encoder, using the task's first instruction.
std::vector<TrainingInstance> distill_refresh(const CrossParams& cross,
                                              const std::vector<TrainingInstance>& data,
                                              const TaskSet& tasks,
                                              const DistillConfig& config = {},
                                              const CandidateFn& extra_candidates = {},
                                              DistillReport* report = nullptr,
                                              const EncoderOptions& options = {});

}  // namespace tartan
