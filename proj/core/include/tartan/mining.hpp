#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tartan/rng.hpp"
#include "tartan/schema.hpp"
#include "tartan/search.hpp"

namespace tartan {

struct MiningConfig {
  std::size_t retrieval_depth = 100;
  double denoise_threshold = 0.1;
  std::size_t uf_top_k = 20;
  double uf_max_fraction = 0.2;
  std::size_t uf_pair_cap = 10000;
  std::uint64_t seed = 0;

  // Throws usage_error("bad_mining_config") on out-of-range values.
  void validate() const;
};

// Ranked retrieval over one fixed corpus, keyed by the (already composed)
// query text.
using RetrieveFn = std::function<std::vector<RankedHit>(const std::string& query_text, std::size_t k)>;
// Relevance probability from a reranker.
using RerankFn = std::function<double(const InstructionSlot&, const Query&, const Document&)>;

// query_id -> doc ids, in retriever rank order.
using PoolMap = std::map<std::string, std::vector<std::string>>;

struct MiningReport {
  std::size_t queries = 0;
  std::size_t empty_queries = 0;  // retriever returned nothing
  std::size_t candidates = 0;
  std::size_t dropped_gold = 0;
  std::size_t dropped_above_threshold = 0;
  std::size_t kept = 0;
};

// Denoised hard negatives: retrieve the top retrieval_depth docs from the
// task corpus, drop gold docs, keep those the reranker scores strictly below
// denoise_threshold. `instruction` is used for both query composition and
// reranking; bootstrap mining passes NoInstruction.
PoolMap mine_hard_negatives(const RetrieveFn& retriever, const RerankFn& reranker,
                            const Task& task, const MiningConfig& config,
                            const InstructionSlot& instruction = NoInstruction{},
                            MiningReport* report = nullptr);

// Instruction-unfollowing negatives: top-k docs of a foreign corpus, all
// taken as negatives. `retriever` must search `foreign`. Throws
// "uf_same_corpus" when foreign is the task's own corpus.
PoolMap mine_unfollowing(const RetrieveFn& retriever, const Task& task, const Corpus& foreign,
                         std::size_t k);

// Global cap on unfollowing samples drawn per (task, foreign corpus) pair.
class UfBudget {
 public:
  explicit UfBudget(std::size_t cap) : cap_(cap) {}

  bool available(const std::string& task_id, const std::string& foreign_corpus) const;
  void consume(const std::string& task_id, const std::string& foreign_corpus);
  std::size_t used(const std::string& task_id, const std::string& foreign_corpus) const;
  std::size_t cap() const { return cap_; }

 private:
  std::size_t cap_;
  std::map<std::pair<std::string, std::string>, std::size_t> used_;
};

struct SampledNegatives {
  std::vector<std::string> hard;
  std::vector<DocKey> unfollowing;
  std::vector<std::string> random;

  std::size_t size() const { return hard.size() + unfollowing.size() + random.size(); }
};

// Draws n_total negatives for one instance: ceil(special_fraction * n_total)
// uniformly from the pooled hard + unfollowing candidates (unfollowing share
// capped at floor(uf_max_fraction * n_total) and by the budget), the rest
// uniformly from the task corpus minus positives. No repeats within one draw.
// Throws "corpus_too_small".
SampledNegatives sample_negatives(const TrainingInstance& instance, const Task& task,
                                  const MiningConfig& config, std::size_t n_total,
                                  double special_fraction, UfBudget& budget, Rng& rng);

// Assembles instances for every query of a task from mined pools. Unfollowing
// pools are given per foreign corpus id. random_negatives receives a seeded
// sample of `random_pool_size` corpus documents (positives excluded).
std::vector<TrainingInstance> build_instances(
    const Task& task, const PoolMap& hard,
    const std::vector<std::pair<std::string, PoolMap>>& unfollowing, std::size_t random_pool_size,
    std::uint64_t seed);

}  // namespace tartan
