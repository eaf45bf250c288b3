#pragma once

// Reference implementations shared by the unit tests and the acceptance
// runner. They are written from the formulas, not from the library code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tartan/encoder.hpp"
#include "tartan/mining.hpp"
#include "tartan/schema.hpp"
#include "tartan/evaluation.hpp"
#include "tartan/rng.hpp"
#include "tartan/search.hpp"
#include "tartan/training.hpp"

namespace tartan::oracle {

// One ranking problem in flat form.
struct MetricCase {
  std::vector<std::string> ranking;
  std::map<std::string, int> grades;
};

inline double ndcg(const MetricCase& c, std::size_t k) {
  double dcg = 0.0;
  for (std::size_t i = 0; i < c.ranking.size() && i < k; ++i) {
    const auto it = c.grades.find(c.ranking[i]);
    const int rel = it == c.grades.end() ? 0 : it->second;
    dcg += (std::pow(2.0, rel) - 1.0) / (std::log(static_cast<double>(i + 2)) / std::log(2.0));
  }
  std::vector<int> rels;
  for (const auto& g : c.grades) rels.push_back(g.second);
  std::sort(rels.rbegin(), rels.rend());
  double ideal = 0.0;
  for (std::size_t i = 0; i < rels.size() && i < k; ++i) {
    ideal += (std::pow(2.0, rels[i]) - 1.0) / (std::log(static_cast<double>(i + 2)) / std::log(2.0));
  }
  return ideal == 0.0 ? 0.0 : dcg / ideal;
}

inline double success(const MetricCase& c, std::size_t k) {
  for (std::size_t i = 0; i < c.ranking.size() && i < k; ++i) {
    const auto it = c.grades.find(c.ranking[i]);
    if (it != c.grades.end() && it->second > 0) return 1.0;
  }
  return 0.0;
}

inline double recall(const MetricCase& c, std::size_t k) {
  double gold = 0.0;
  double hit = 0.0;
  for (const auto& [doc, g] : c.grades) {
    if (g <= 0) continue;
    gold += 1.0;
    const auto pos = std::find(c.ranking.begin(), c.ranking.end(), doc);
    if (pos != c.ranking.end() && static_cast<std::size_t>(pos - c.ranking.begin()) < k) hit += 1.0;
  }
  return gold == 0.0 ? 0.0 : hit / gold;
}

// Full sort of every row under the tie rule.
inline std::vector<std::pair<std::string, double>> topk(const DenseIndex& index,
                                                        const std::vector<double>& query,
                                                        std::size_t k) {
  std::vector<std::pair<std::string, double>> all;
  for (std::size_t i = 0; i < index.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < index.dim; ++j) {
      s += static_cast<double>(index.matrix[i * index.dim + j]) * query[j];
    }
    all.emplace_back(index.doc_ids[i], s);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

// Hand-evaluated Okapi BM25 term weight for one term.
inline double bm25_term(double n_docs, double df, double tf, double doc_len, double avg_len,
                        double k1, double b) {
  const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
  return idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * doc_len / avg_len));
}

struct GradCheck {
  std::size_t checked = 0;
  double worst = 0.0;  // largest relative error seen
};

// |a - n| / max(|a|, |n|, floor). Central differences at h = 1e-5 on a loss
// of order 10 carry roundoff near 1e-10, so coordinates with gradients below
// the floor are compared on an absolute scale instead.
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central differences on up to `max_coords` coordinates of one parameter
// slot. `get` returns a reference into params; `loss` evaluates the batch.
inline void check_coords(std::size_t n, std::size_t max_coords, Rng& rng,
                         const std::function<double&(std::size_t)>& get,
                         const std::function<double(std::size_t)>& analytic,
                         const std::function<double()>& loss, double h, GradCheck& out) {
  const auto picks = rng.sample_indices(n, std::min(n, max_coords));
  for (const auto i : picks) {
    double& x = get(i);
    const double saved = x;
    x = saved + h;
    const double up = loss();
    x = saved - h;
    const double down = loss();
    x = saved;
    const double numeric = (up - down) / (2.0 * h);
    out.worst = std::max(out.worst, relative_error(analytic(i), numeric));
    ++out.checked;
  }
}

// Random words over a small vocabulary, so features collide across texts.
inline std::string random_text(Rng& rng, std::size_t min_len, std::size_t max_len,
                               std::size_t vocab = 30) {
  const std::size_t n = min_len + rng.below(max_len - min_len + 1);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!out.empty()) out += ' ';
    out += "v" + std::to_string(rng.below(vocab));
  }
  return out;
}

inline Document random_doc(Rng& rng, const std::string& id, const std::string& corpus) {
  return Document{id, std::nullopt, random_text(rng, 2, 8), corpus};
}

// Dual batch with `items` queries, `negatives` explicit negatives each and
// one featureless document so the empty row is exercised.
inline DualBatch random_dual_batch(Rng& rng, std::size_t items, std::size_t negatives) {
  DualBatch batch;
  std::size_t next = 0;
  auto doc = [&] { return random_doc(rng, "d" + std::to_string(next++), "c"); };
  for (std::size_t i = 0; i < items; ++i) {
    DualItem item;
    if (rng.below(2) == 0) item.instruction = Instruction{"find " + random_text(rng, 1, 3), "", "", "", ""};
    item.query = Query{"q" + std::to_string(i), random_text(rng, 1, 5), "t"};
    item.positive = doc();
    for (std::size_t j = 0; j < negatives; ++j) item.negatives.push_back(doc());
    batch.items.push_back(std::move(item));
  }
  batch.items.back().negatives.push_back(Document{"blank", std::nullopt, "", "c"});
  return batch;
}

inline CrossBatch random_cross_batch(Rng& rng, std::size_t items) {
  CrossBatch batch;
  for (std::size_t i = 0; i < items; ++i) {
    CrossItem item;
    if (rng.below(2) == 0) item.instruction = Instruction{"find " + random_text(rng, 1, 3), "", "", "", ""};
    item.query = Query{"q" + std::to_string(i), random_text(rng, 1, 5), "t"};
    item.doc = random_doc(rng, "d" + std::to_string(i), "c");
    item.label = static_cast<int>(rng.below(2));
    batch.items.push_back(std::move(item));
  }
  return batch;
}

// Sorted first so the sample does not depend on hash-map order.
template <typename Rows>
std::vector<std::uint32_t> sampled_rows(const Rows& rows, std::size_t max_rows, Rng& rng) {
  std::vector<std::uint32_t> all;
  for (const auto& entry : rows) all.push_back(entry.first);
  std::sort(all.begin(), all.end());
  std::vector<std::uint32_t> out;
  for (const auto i : rng.sample_indices(all.size(), max_rows)) out.push_back(all[i]);
  return out;
}

// Worst relative error of the dual gradient over a sample of touched table
// rows, the empty row and the projection.
inline GradCheck check_dual_gradient(DualParams params, const DualBatch& batch, std::uint64_t seed,
                                     double h = 1e-5, std::size_t max_coords = 32,
                                     std::size_t max_rows = 16) {
  Rng rng(seed);
  const auto lg = dual_loss_grad(params, batch);
  const auto loss = [&] { return dual_loss_grad(params, batch).loss; };
  GradCheck out;
  const std::size_t dim = params.dim;
  for (const auto r : sampled_rows(lg.grads.table, max_rows, rng)) {
    check_coords(
        dim, max_coords, rng, [&](std::size_t j) -> double& { return params.table.mutable_row(r)[j]; },
        [&](std::size_t j) { return lg.grads.table_at(r, static_cast<std::uint32_t>(j)); }, loss, h, out);
  }
  check_coords(
      dim, max_coords, rng, [&](std::size_t j) -> double& { return params.empty_row[j]; },
      [&](std::size_t j) { return lg.grads.empty_row[j]; }, loss, h, out);
  check_coords(
      params.projection.size(), max_coords, rng,
      [&](std::size_t j) -> double& { return params.projection[j]; },
      [&](std::size_t j) { return lg.grads.projection[j]; }, loss, h, out);
  return out;
}

inline GradCheck check_cross_gradient(CrossParams params, const CrossBatch& batch,
                                      std::uint64_t seed, double h = 1e-5,
                                      std::size_t max_coords = 32, std::size_t max_rows = 16) {
  Rng rng(seed);
  const auto lg = cross_loss_grad(params, batch);
  const auto loss = [&] { return cross_loss_grad(params, batch).loss; };
  GradCheck out;
  const std::size_t dim = params.dim;
  for (const auto r : sampled_rows(lg.grads.table, max_rows, rng)) {
    check_coords(
        dim, max_coords, rng, [&](std::size_t j) -> double& { return params.table.mutable_row(r)[j]; },
        [&](std::size_t j) { return lg.grads.table_at(r, static_cast<std::uint32_t>(j)); }, loss, h, out);
  }
  check_coords(
      params.hidden.size(), max_coords, rng, [&](std::size_t j) -> double& { return params.hidden[j]; },
      [&](std::size_t j) { return lg.grads.hidden[j]; }, loss, h, out);
  check_coords(
      params.hidden_bias.size(), max_coords, rng,
      [&](std::size_t j) -> double& { return params.hidden_bias[j]; },
      [&](std::size_t j) { return lg.grads.hidden_bias[j]; }, loss, h, out);
  check_coords(
      params.output.size(), max_coords, rng, [&](std::size_t j) -> double& { return params.output[j]; },
      [&](std::size_t j) { return lg.grads.output[j]; }, loss, h, out);
  check_coords(
      1, 1, rng, [&](std::size_t) -> double& { return params.output_bias; },
      [&](std::size_t) { return lg.grads.output_bias; }, loss, h, out);
  return out;
}

// Random (run, qrels) pair plus the same data in oracle form.
struct RandomCase {
  Run run;
  Qrels qrels;
  std::vector<MetricCase> judged;  // one per query with a positive grade
};

inline RandomCase random_case(Rng& rng) {
  RandomCase c;
  const std::size_t n_queries = 1 + rng.below(8);
  for (std::size_t q = 0; q < n_queries; ++q) {
    const std::string qid = "q" + std::to_string(q);
    MetricCase mc;
    const std::size_t n_docs = 1 + rng.below(40);
    const std::size_t n_judged = rng.below(n_docs + 1);
    for (const auto i : rng.sample_indices(n_docs, n_judged)) {
      const int g = static_cast<int>(rng.below(4));
      c.qrels.set(qid, "d" + std::to_string(i), g);
      mc.grades["d" + std::to_string(i)] = g;
    }
    if (rng.below(6) != 0) {
      for (const auto i : rng.sample_indices(n_docs, rng.below(n_docs + 1))) {
        mc.ranking.push_back("d" + std::to_string(i));
      }
      c.run[qid] = mc.ranking;
    }
    bool positive = false;
    for (const auto& [d, g] : mc.grades) positive = positive || g > 0;
    if (positive) c.judged.push_back(mc);
  }
  c.run["unjudged"] = {"d0"};
  return c;
}

inline double mean(const std::vector<MetricCase>& cases,
                   double (*f)(const MetricCase&, std::size_t), std::size_t k) {
  if (cases.empty()) return 0.0;
  double s = 0.0;
  for (const auto& c : cases) s += f(c, k);
  return s / static_cast<double>(cases.size());
}

// Random index; with `quantized` every coordinate is in {-1, 0, 1} so many
// rows tie exactly.
inline DenseIndex random_index(Rng& rng, std::size_t n, std::uint32_t dim, bool quantized) {
  DenseIndex index;
  index.dim = dim;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  for (std::size_t i = 0; i < n; ++i) {
    index.doc_ids.push_back("doc" + std::to_string(order[i]));
    for (std::uint32_t j = 0; j < dim; ++j) {
      index.matrix.push_back(quantized ? static_cast<float>(static_cast<int>(rng.below(3)) - 1)
                                       : static_cast<float>(rng.uniform(-1.0, 1.0)));
    }
  }
  return index;
}

inline Corpus make_corpus(const std::string& id, const std::vector<std::string>& texts) {
  std::vector<Document> docs;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    docs.push_back(Document{"d" + std::to_string(i), std::nullopt, texts[i], id});
  }
  return Corpus(id, std::move(docs));
}

// Instance whose special pool is dominated by unfollowing candidates,
// including some that wrongly name the task's own corpus.
inline TrainingInstance adversarial_instance(const Task& task, std::size_t n_uf) {
  TrainingInstance inst;
  inst.task_id = task.id;
  inst.query_id = task.queries[0].id;
  inst.positives = task.qrels.positives(inst.query_id);
  inst.hard_negatives = {task.corpus.docs()[0].id};
  for (std::size_t i = 0; i < n_uf; ++i) {
    inst.unfollowing_negatives.push_back({i % 7 == 0 ? task.corpus_id() : "foreign" + std::to_string(i % 3),
                                          "f" + std::to_string(i)});
  }
  return inst;
}

// Frozen dense scorer with scores rounded to one decimal, so rankings are
// full of exact ties and the tie rule decides the order.
inline RetrievalSystem tied_dense_system(const DualParams& params) {
  return [&params](const Corpus& corpus) -> SearchFn {
    std::vector<Embedding> docs;
    for (const auto& d : corpus.docs()) docs.push_back(embed(params, document_text(d)));
    return [&params, &corpus, docs](const Task&, const Query& q, std::size_t k) {
      const auto e = embed(params, q.text);
      std::vector<RankedHit> hits;
      for (std::size_t i = 0; i < docs.size(); ++i) {
        hits.push_back({corpus.docs()[i].id, std::round(10.0 * dot(e.values, docs[i].values)) / 10.0, 0});
      }
      finalize_ranking(hits, k);
      return hits;
    };
  };
}

}  // namespace tartan::oracle
