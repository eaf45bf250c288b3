#include "tartan/mining.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tartan/error.hpp"

namespace tartan {

namespace {

std::size_t ceil_fraction(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

std::size_t floor_fraction(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

}  // namespace

void MiningConfig::validate() const {
  if (!(denoise_threshold > 0.0 && denoise_threshold < 1.0)) {
    throw usage_error("bad_mining_config", "denoise_threshold must be in (0,1)");
  }
  if (!(uf_max_fraction >= 0.0 && uf_max_fraction <= 1.0)) {
    throw usage_error("bad_mining_config", "uf_max_fraction must be in [0,1]");
  }
  if (retrieval_depth == 0 || uf_top_k == 0) {
    throw usage_error("bad_mining_config", "depths must be >= 1");
  }
}

PoolMap mine_hard_negatives(const RetrieveFn& retriever, const RerankFn& reranker,
                            const Task& task, const MiningConfig& config,
                            const InstructionSlot& instruction, MiningReport* report) {
  config.validate();
  MiningReport local;
  PoolMap out;
  for (const auto& q : task.queries) {
    ++local.queries;
    const auto hits = retriever(compose_input(instruction, q), config.retrieval_depth);
    auto& pool = out[q.id];
    if (hits.empty()) {
      ++local.empty_queries;
      continue;
    }
    for (const auto& h : hits) {
      ++local.candidates;
      if (task.qrels.grade(q.id, h.doc_id) > 0) {
        ++local.dropped_gold;
        continue;
      }
      const Document* doc = task.corpus.find(h.doc_id);
      if (doc == nullptr) throw data_error("unknown_document", h.doc_id);
      if (reranker(instruction, q, *doc) < config.denoise_threshold) {
        pool.push_back(h.doc_id);
        ++local.kept;
      } else {
        ++local.dropped_above_threshold;
      }
    }
  }
  if (report != nullptr) *report = local;
  return out;
}

PoolMap mine_unfollowing(const RetrieveFn& retriever, const Task& task, const Corpus& foreign,
                         std::size_t k) {
  if (foreign.id() == task.corpus_id()) throw data_error("uf_same_corpus", foreign.id());
  if (k == 0) throw usage_error("bad_k", "k must be >= 1");
  PoolMap out;
  for (const auto& q : task.queries) {
    auto& pool = out[q.id];
    for (const auto& h : retriever(q.text, k)) {
      if (!foreign.contains(h.doc_id)) throw data_error("unknown_document", h.doc_id);
      pool.push_back(h.doc_id);
      if (pool.size() == k) break;
    }
  }
  return out;
}

bool UfBudget::available(const std::string& task_id, const std::string& foreign_corpus) const {
  return used(task_id, foreign_corpus) < cap_;
}

void UfBudget::consume(const std::string& task_id, const std::string& foreign_corpus) {
  ++used_[{task_id, foreign_corpus}];
}

std::size_t UfBudget::used(const std::string& task_id, const std::string& foreign_corpus) const {
  const auto it = used_.find({task_id, foreign_corpus});
  return it == used_.end() ? 0 : it->second;
}

SampledNegatives sample_negatives(const TrainingInstance& instance, const Task& task,
                                  const MiningConfig& config, std::size_t n_total,
                                  double special_fraction, UfBudget& budget, Rng& rng) {
  if (n_total == 0) throw usage_error("bad_negative_count", "n_total must be >= 1");
  const std::set<std::string> positives(instance.positives.begin(), instance.positives.end());
  if (task.corpus.size() < n_total + positives.size()) {
    throw data_error("corpus_too_small", task.id);
  }

  SampledNegatives out;
  std::set<std::string> taken;  // own-corpus ids already drawn

  // Pooled special candidates: hard first, then unfollowing, deduplicated.
  struct Candidate {
    bool unfollowing;
    std::size_t index;
  };
  std::vector<Candidate> pool;
  {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < instance.hard_negatives.size(); ++i) {
      const auto& id = instance.hard_negatives[i];
      if (positives.contains(id) || !seen.insert(id).second) continue;
      pool.push_back({false, i});
    }
    std::set<DocKey> seen_uf;
    for (std::size_t i = 0; i < instance.unfollowing_negatives.size(); ++i) {
      const auto& key = instance.unfollowing_negatives[i];
      if (key.corpus_id == task.corpus_id() || !seen_uf.insert(key).second) continue;
      pool.push_back({true, i});
    }
  }

  const std::size_t special_quota = std::min(ceil_fraction(special_fraction, n_total), n_total);
  const std::size_t uf_cap = floor_fraction(config.uf_max_fraction, n_total);
  std::size_t remaining = pool.size();
  while (out.hard.size() + out.unfollowing.size() < special_quota && remaining > 0) {
    const std::size_t pick = rng.below(remaining);
    const Candidate c = pool[pick];
    std::swap(pool[pick], pool[remaining - 1]);
    --remaining;
    if (c.unfollowing) {
      const auto& key = instance.unfollowing_negatives[c.index];
      if (out.unfollowing.size() >= uf_cap || !budget.available(task.id, key.corpus_id)) continue;
      budget.consume(task.id, key.corpus_id);
      out.unfollowing.push_back(key);
    } else {
      const auto& id = instance.hard_negatives[c.index];
      out.hard.push_back(id);
      taken.insert(id);
    }
  }

  // Random remainder from the task corpus, excluding positives and hard draws.
  const auto& docs = task.corpus.docs();
  const std::size_t need = n_total - out.size();
  std::size_t attempts = 0;
  while (out.random.size() < need && attempts < 32 * (need + 1)) {
    ++attempts;
    const auto& id = docs[rng.below(docs.size())].id;
    if (positives.contains(id) || taken.contains(id)) continue;
    taken.insert(id);
    out.random.push_back(id);
  }
  if (out.random.size() < need) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (!positives.contains(docs[i].id) && !taken.contains(docs[i].id)) eligible.push_back(i);
    }
    for (const auto i : rng.sample_indices(eligible.size(), need - out.random.size())) {
      out.random.push_back(docs[eligible[i]].id);
    }
  }
  return out;
}

std::vector<TrainingInstance> build_instances(
    const Task& task, const PoolMap& hard,
    const std::vector<std::pair<std::string, PoolMap>>& unfollowing, std::size_t random_pool_size,
    std::uint64_t seed) {
  std::vector<TrainingInstance> out;
  out.reserve(task.queries.size());
  for (const auto& q : task.queries) {
    TrainingInstance inst;
    inst.task_id = task.id;
    inst.query_id = q.id;
    inst.positives = task.qrels.positives(q.id);
    const std::set<std::string> pos(inst.positives.begin(), inst.positives.end());
    if (const auto it = hard.find(q.id); it != hard.end()) {
      for (const auto& d : it->second) {
        if (!pos.contains(d)) inst.hard_negatives.push_back(d);
      }
    }
    for (const auto& [corpus_id, pools] : unfollowing) {
      if (corpus_id == task.corpus_id()) throw data_error("uf_same_corpus", corpus_id);
      if (const auto it = pools.find(q.id); it != pools.end()) {
        for (const auto& d : it->second) inst.unfollowing_negatives.push_back({corpus_id, d});
      }
    }
    if (random_pool_size > 0) {
      Rng rng(derive_seed(seed, task.id + "/" + q.id));
      std::vector<std::size_t> eligible;
      for (std::size_t i = 0; i < task.corpus.size(); ++i) {
        if (!pos.contains(task.corpus.docs()[i].id)) eligible.push_back(i);
      }
      for (const auto i : rng.sample_indices(eligible.size(), random_pool_size)) {
        inst.random_negatives.push_back(task.corpus.docs()[eligible[i]].id);
      }
    }
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace tartan
