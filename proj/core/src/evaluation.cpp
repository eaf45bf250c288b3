#include "tartan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "nlohmann/json.hpp"
#include "tartan/error.hpp"
#include "tartan/parallel.hpp"

namespace tartan {

namespace {

template <typename PerQuery>
double mean_over_judged(const Run& run, const Qrels& qrels, MetricWarnings* warnings,
                        PerQuery&& per_query) {
  if (warnings != nullptr) {
    for (const auto& [qid, docs] : run) {
      if (!qrels.contains_query(qid)) warnings->skipped_queries.push_back(qid);
    }
  }
  static const std::vector<std::string> kEmpty;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [qid, grades] : qrels.entries()) {
    const bool any_positive =
        std::any_of(grades.begin(), grades.end(), [](const auto& g) { return g.second > 0; });
    if (!any_positive) continue;
    const auto it = run.find(qid);
    sum += per_query(it == run.end() ? kEmpty : it->second, grades);
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

int grade_of(const Qrels::Grades& grades, const std::string& doc) {
  const auto it = grades.find(doc);
  return it == grades.end() ? 0 : it->second;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

double ndcg_at_k(const Run& run, const Qrels& qrels, std::size_t k, MetricWarnings* warnings) {
  if (k == 0) throw usage_error("bad_k", "k must be >= 1");
  return mean_over_judged(run, qrels, warnings, [k](const auto& ranking, const auto& grades) {
    double dcg = 0.0;
    const std::size_t depth = std::min(k, ranking.size());
    for (std::size_t i = 0; i < depth; ++i) {
      const int rel = grade_of(grades, ranking[i]);
      if (rel > 0) dcg += (std::exp2(rel) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
    }
    std::vector<int> ideal;
    for (const auto& [doc, g] : grades) ideal.push_back(g);
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) {
      if (ideal[i] > 0) idcg += (std::exp2(ideal[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
    }
    return idcg > 0.0 ? dcg / idcg : 0.0;
  });
}

double success_at_k(const Run& run, const Qrels& qrels, std::size_t k, MetricWarnings* warnings) {
  if (k == 0) throw usage_error("bad_k", "k must be >= 1");
  return mean_over_judged(run, qrels, warnings, [k](const auto& ranking, const auto& grades) {
    const std::size_t depth = std::min(k, ranking.size());
    for (std::size_t i = 0; i < depth; ++i) {
      if (grade_of(grades, ranking[i]) > 0) return 1.0;
    }
    return 0.0;
  });
}

double recall_at_k(const Run& run, const Qrels& qrels, std::size_t k, MetricWarnings* warnings) {
  if (k == 0) throw usage_error("bad_k", "k must be >= 1");
  return mean_over_judged(run, qrels, warnings, [k](const auto& ranking, const auto& grades) {
    std::size_t gold = 0;
    for (const auto& [doc, g] : grades) gold += g > 0 ? 1 : 0;
    std::set<std::string> seen;
    std::size_t found = 0;
    const std::size_t depth = std::min(k, ranking.size());
    for (std::size_t i = 0; i < depth; ++i) {
      if (grade_of(grades, ranking[i]) > 0 && seen.insert(ranking[i]).second) ++found;
    }
    return static_cast<double>(found) / static_cast<double>(gold);
  });
}

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::ndcg: return "ndcg";
    case Metric::success: return "success";
    case Metric::recall: return "recall";
  }
  return "unknown";
}

std::optional<Metric> parse_metric(std::string_view name) {
  for (auto m : {Metric::ndcg, Metric::success, Metric::recall}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

double compute_metric(Metric metric, const Run& run, const Qrels& qrels, std::size_t k,
                      MetricWarnings* warnings) {
  switch (metric) {
    case Metric::ndcg: return ndcg_at_k(run, qrels, k, warnings);
    case Metric::success: return success_at_k(run, qrels, k, warnings);
    case Metric::recall: return recall_at_k(run, qrels, k, warnings);
  }
  throw usage_error("unknown_metric");
}

std::string namespaced_id(std::string_view corpus_id, std::string_view doc_id) {
  std::string out;
  out.reserve(corpus_id.size() + 2 + doc_id.size());
  out += corpus_id;
  out += "::";
  out += doc_id;
  return out;
}

Corpus pooled_corpus(const std::vector<Task>& tasks) {
  Corpus pooled("pooled");
  std::map<std::string, const Corpus*> added;
  for (const auto& t : tasks) {
    const auto [it, inserted] = added.emplace(t.corpus_id(), &t.corpus);
    if (!inserted) {
      if (!(*it->second == t.corpus)) throw data_error("id_collision", t.corpus_id());
      continue;
    }
    for (const auto& d : t.corpus.docs()) {
      Document nd = d;
      nd.id = namespaced_id(t.corpus_id(), d.id);
      if (!pooled.add(std::move(nd))) throw data_error("id_collision", namespaced_id(t.corpus_id(), d.id));
    }
  }
  return pooled;
}

Qrels namespaced_qrels(const Task& task) {
  Qrels out;
  for (const auto& [qid, grades] : task.qrels.entries()) {
    for (const auto& [did, g] : grades) out.set(qid, namespaced_id(task.corpus_id(), did), g);
  }
  return out;
}

Run run_system(const SearchFn& search, const Task& task, std::size_t depth, std::size_t threads) {
  std::vector<std::vector<std::string>> rankings(task.queries.size());
  parallel_for(task.queries.size(), threads, [&](std::size_t i) {
    for (const auto& h : search(task, task.queries[i], depth)) rankings[i].push_back(h.doc_id);
  });
  Run run;
  for (std::size_t i = 0; i < task.queries.size(); ++i) {
    run[task.queries[i].id] = std::move(rankings[i]);
  }
  return run;
}

RunReport evaluate_pooled(const RetrievalSystem& system, const std::vector<Task>& tasks,
                          Metric metric, std::size_t k, std::size_t threads) {
  if (tasks.size() < 2) throw usage_error("too_few_tasks", "pooled evaluation needs >= 2 tasks");
  RunReport report;
  report.metric = metric;
  report.k = k;

  std::vector<const Task*> ordered;
  for (const auto& t : tasks) ordered.push_back(&t);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Task* a, const Task* b) { return a->id < b->id; });

  const Corpus pooled = pooled_corpus(tasks);
  const SearchFn pooled_search = system(pooled);
  std::set<std::string> seen_tasks;
  for (const Task* t : ordered) {
    if (!seen_tasks.insert(t->id).second) continue;
    const SearchFn closed_search = system(t->corpus);
    TaskScore score;
    score.task_id = t->id;
    score.closed = compute_metric(metric, run_system(closed_search, *t, k, threads), t->qrels, k);
    score.pooled = compute_metric(metric, run_system(pooled_search, *t, k, threads),
                                  namespaced_qrels(*t), k);
    report.per_task.push_back(score);
  }
  for (const auto& s : report.per_task) {
    report.closed_avg += s.closed;
    report.pooled_avg += s.pooled;
  }
  report.closed_avg /= static_cast<double>(report.per_task.size());
  report.pooled_avg /= static_cast<double>(report.per_task.size());
  report.delta = report.closed_avg - report.pooled_avg;
  return report;
}

std::string report_json(const RunReport& report) {
  nlohmann::ordered_json j;
  j["metric"] = std::string(to_string(report.metric));
  j["k"] = report.k;
  auto tasks = nlohmann::ordered_json::array();
  for (const auto& s : report.per_task) {
    nlohmann::ordered_json t;
    t["task"] = s.task_id;
    t["closed"] = s.closed;
    t["pooled"] = s.pooled;
    t["delta"] = s.delta();
    tasks.push_back(std::move(t));
  }
  j["tasks"] = std::move(tasks);
  j["closed_avg"] = report.closed_avg;
  j["pooled_avg"] = report.pooled_avg;
  j["delta"] = report.delta;
  return j.dump(2) + "\n";
}

std::string report_tsv(const RunReport& report) {
  std::ostringstream out;
  out << "task\tclosed\tpooled\tdelta\n";
  for (const auto& s : report.per_task) {
    out << s.task_id << '\t' << format_double(s.closed) << '\t' << format_double(s.pooled) << '\t'
        << format_double(s.delta()) << '\n';
  }
  out << "average\t" << format_double(report.closed_avg) << '\t' << format_double(report.pooled_avg)
      << '\t' << format_double(report.delta) << '\n';
  return out.str();
}

}  // namespace tartan
