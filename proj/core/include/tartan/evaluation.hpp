#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tartan/schema.hpp"
#include "tartan/search.hpp"

namespace tartan {

// query_id -> ranked doc ids (best first).
using Run = std::map<std::string, std::vector<std::string>, std::less<>>;

struct MetricWarnings {
  std::vector<std::string> skipped_queries;  // in the run but absent from qrels
};

// All three metrics average over the qrels queries that have at least one
// positive grade; such a query missing from the run scores 0.

// DCG@k = sum_i (2^rel_i - 1) / log2(i + 1); normalized by the ideal DCG@k.
double ndcg_at_k(const Run& run, const Qrels& qrels, std::size_t k,
                 MetricWarnings* warnings = nullptr);
// 1 if any positive appears in the top k.
double success_at_k(const Run& run, const Qrels& qrels, std::size_t k,
                    MetricWarnings* warnings = nullptr);
// |gold in top k| / |gold|.
double recall_at_k(const Run& run, const Qrels& qrels, std::size_t k,
                   MetricWarnings* warnings = nullptr);

enum class Metric { ndcg, success, recall };

std::string_view to_string(Metric metric);
std::optional<Metric> parse_metric(std::string_view name);
double compute_metric(Metric metric, const Run& run, const Qrels& qrels, std::size_t k,
                      MetricWarnings* warnings = nullptr);

// A retrieval system is prepared once per corpus and then queried per task
// query; it decides by itself whether to use the task's instructions.
using SearchFn = std::function<std::vector<RankedHit>(const Task&, const Query&, std::size_t k)>;
using RetrievalSystem = std::function<SearchFn(const Corpus&)>;

// "corpus_id::doc_id"
std::string namespaced_id(std::string_view corpus_id, std::string_view doc_id);

// Union of all task corpora with namespaced ids. Tasks sharing a corpus id
// contribute it once; differing documents under a shared namespaced id throw
// "id_collision".
Corpus pooled_corpus(const std::vector<Task>& tasks);
Qrels namespaced_qrels(const Task& task);

struct TaskScore {
  std::string task_id;
  double closed = 0.0;
  double pooled = 0.0;

  double delta() const { return closed - pooled; }
};

struct RunReport {
  Metric metric = Metric::ndcg;
  std::size_t k = 10;
  std::vector<TaskScore> per_task;  // task id order
  double closed_avg = 0.0;
  double pooled_avg = 0.0;
  double delta = 0.0;  // closed_avg - pooled_avg
};

// Runs every query of the task through `search`, keeping the top `depth` ids.
Run run_system(const SearchFn& search, const Task& task, std::size_t depth,
               std::size_t threads = 1);

// Closed (own corpus) vs pooled (union corpus) evaluation of every task.
// Requires at least two tasks.
RunReport evaluate_pooled(const RetrievalSystem& system, const std::vector<Task>& tasks,
                          Metric metric, std::size_t k, std::size_t threads = 1);

std::string report_json(const RunReport& report);
std::string report_tsv(const RunReport& report);

}  // namespace tartan
