#include "tartan/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>

#include "nlohmann/json.hpp"
#include "tartan/error.hpp"
#include "tartan/rng.hpp"

namespace tartan {

namespace {

double round_to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

std::vector<double>& grad_row(std::unordered_map<std::uint32_t, std::vector<double>>& table,
                              std::uint32_t row, std::size_t dim) {
  auto& g = table[row];
  if (g.empty()) g.assign(dim, 0.0);
  return g;
}

// Scatters d(loss)/d(pooled) back onto the table rows of a mean-pooled text.
void scatter_pooled(const FeatureIds& features, std::span<const double> d_pooled, std::size_t dim,
                    std::unordered_map<std::uint32_t, std::vector<double>>& table) {
  const double inv_total = 1.0 / static_cast<double>(features.total());
  for (std::size_t f = 0; f < features.size(); ++f) {
    const double w = static_cast<double>(features.counts[f]) * inv_total;
    auto& g = grad_row(table, features.ids[f], dim);
    for (std::size_t c = 0; c < dim; ++c) g[c] += w * d_pooled[c];
  }
}

void backprop_dual(const DualParams& params, const DualTrace& trace, std::span<const double> d_emb,
                   DualGrads& grads) {
  const std::size_t dim = params.dim;
  const auto& e = trace.embedding.values;
  const double along = dot(e, d_emb);
  std::vector<double> du(dim);
  for (std::size_t r = 0; r < dim; ++r) du[r] = (d_emb[r] - e[r] * along) / trace.norm;
  std::vector<double> dm(dim, 0.0);
  for (std::size_t r = 0; r < dim; ++r) {
    const double* prow = params.projection.data() + r * dim;
    double* grow = grads.projection.data() + r * dim;
    for (std::size_t c = 0; c < dim; ++c) {
      grow[c] += du[r] * trace.pooled[c];
      dm[c] += prow[c] * du[r];
    }
  }
  if (trace.features.empty()) {
    for (std::size_t c = 0; c < dim; ++c) grads.empty_row[c] += dm[c];
  } else {
    scatter_pooled(trace.features, dm, dim, grads.table);
  }
}

struct AdamSlots {
  std::vector<double> m;
  std::vector<double> v;
};

struct AdamStep {
  double lr;
  double beta1;
  double beta2;
  double epsilon;
  double correction1;
  double correction2;

  AdamStep(const TrainConfig& c, double learning_rate, std::size_t t)
      : lr(learning_rate),
        beta1(c.adam_beta1),
        beta2(c.adam_beta2),
        epsilon(c.adam_epsilon),
        correction1(1.0 - std::pow(c.adam_beta1, static_cast<double>(t))),
        correction2(1.0 - std::pow(c.adam_beta2, static_cast<double>(t))) {}

  void apply(std::span<double> param, std::span<const double> grad, AdamSlots& s) const {
    if (s.m.empty()) {
      s.m.assign(param.size(), 0.0);
      s.v.assign(param.size(), 0.0);
    }
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double g = grad[i];
      s.m[i] = beta1 * s.m[i] + (1.0 - beta1) * g;
      s.v[i] = beta2 * s.v[i] + (1.0 - beta2) * g * g;
      const double mhat = s.m[i] / correction1;
      const double vhat = s.v[i] / correction2;
      param[i] = round_to_float(param[i] - lr * mhat / (std::sqrt(vhat) + epsilon));
    }
  }
};

// Sparse ("lazy") Adam: only table rows with a gradient this step are updated.
struct SparseAdam {
  std::unordered_map<std::uint32_t, AdamSlots> rows;

  void apply(EmbeddingTable& table,
             const std::unordered_map<std::uint32_t, std::vector<double>>& grads,
             const AdamStep& step) {
    for (const auto& [row, g] : grads) step.apply(table.mutable_row(row), g, rows[row]);
  }
};

const Query& resolve_query(const Task& task, const std::string& query_id) {
  const Query* q = task.find_query(query_id);
  if (q == nullptr) throw data_error("unknown_query", task.id + "/" + query_id);
  return *q;
}

const Document& resolve_doc(const Task& task, const std::string& doc_id) {
  const Document* d = task.corpus.find(doc_id);
  if (d == nullptr) throw data_error("unknown_document", task.id + "/" + doc_id);
  return *d;
}

InstructionSlot pick_instruction(const Task& task, bool use, Rng& rng) {
  // Always consume the draw so runs with and without instructions see the
  // same downstream random stream.
  const std::size_t idx = rng.below(std::max<std::size_t>(task.instructions.size(), 1));
  if (!use || task.instructions.empty()) return NoInstruction{};
  return task.instructions[idx];
}

std::vector<std::size_t> usable_instances(const std::vector<TrainingInstance>& data) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data[i].positives.empty()) idx.push_back(i);
  }
  return idx;
}

// Cycles through shuffled epochs of instance indices.
class EpochSampler {
 public:
  EpochSampler(std::vector<std::size_t> order, Rng& rng) : order_(std::move(order)), rng_(rng) {
    rng_.shuffle(order_);
  }
  std::size_t next() {
    if (cursor_ == order_.size()) {
      rng_.shuffle(order_);
      cursor_ = 0;
    }
    return order_[cursor_++];
  }

 private:
  std::vector<std::size_t> order_;
  Rng& rng_;
  std::size_t cursor_ = 0;
};

// Draws instance indices for one batch. Task-homogeneous batches take the
// lead instance from the global epoch order and fill the rest from the lead's
// task, so in-batch negatives come from the same corpus.
class BatchSampler {
 public:
  BatchSampler(const std::vector<TrainingInstance>& data, const std::vector<std::size_t>& usable,
               bool homogeneous, Rng& rng)
      : global_(usable, rng), homogeneous_(homogeneous) {
    if (!homogeneous_) return;
    std::map<std::string, std::vector<std::size_t>> by_task;
    for (const auto i : usable) by_task[data[i].task_id].push_back(i);
    for (auto& [task, idx] : by_task) per_task_.emplace(task, EpochSampler(std::move(idx), rng));
  }

  std::vector<std::size_t> next(const std::vector<TrainingInstance>& data, std::size_t size) {
    std::vector<std::size_t> out{global_.next()};
    if (!homogeneous_) {
      while (out.size() < size) out.push_back(global_.next());
      return out;
    }
    auto& same = per_task_.at(data[out.front()].task_id);
    while (out.size() < size) out.push_back(same.next());
    return out;
  }

 private:
  EpochSampler global_;
  bool homogeneous_;
  std::map<std::string, EpochSampler> per_task_;
};

}  // namespace

TaskSet::TaskSet(const std::vector<Task>& tasks) {
  for (const auto& t : tasks) {
    tasks_.emplace(t.id, &t);
    corpora_.emplace(t.corpus_id(), &t.corpus);
  }
}

const Task* TaskSet::find_task(const std::string& task_id) const {
  const auto it = tasks_.find(task_id);
  return it == tasks_.end() ? nullptr : it->second;
}

const Task& TaskSet::task(const std::string& task_id) const {
  const Task* t = find_task(task_id);
  if (t == nullptr) throw data_error("unknown_task", task_id);
  return *t;
}

const Corpus& TaskSet::corpus(const std::string& corpus_id) const {
  const auto it = corpora_.find(corpus_id);
  if (it == corpora_.end()) throw data_error("unknown_corpus", corpus_id);
  return *it->second;
}

const Document& TaskSet::doc(const DocKey& key) const {
  const Document* d = corpus(key.corpus_id).find(key.doc_id);
  if (d == nullptr) throw data_error("unknown_document", key.corpus_id + "/" + key.doc_id);
  return *d;
}

double DualGrads::table_at(std::uint32_t row, std::uint32_t col) const {
  const auto it = table.find(row);
  return it == table.end() ? 0.0 : it->second[col];
}

double CrossGrads::table_at(std::uint32_t row, std::uint32_t col) const {
  const auto it = table.find(row);
  return it == table.end() ? 0.0 : it->second[col];
}

DualLossGrad dual_loss_grad(const DualParams& params, const DualBatch& batch,
                            const EncoderOptions& options) {
  if (batch.items.empty()) throw usage_error("empty_batch");
  const std::size_t n = batch.items.size();
  const std::size_t dim = params.dim;

  std::vector<const Document*> pool;
  std::map<DocKey, std::size_t> slot_of;
  auto add_to_pool = [&](const Document& d) {
    auto [it, inserted] = slot_of.try_emplace(DocKey{d.corpus_id, d.id}, pool.size());
    if (inserted) pool.push_back(&d);
    return it->second;
  };
  std::vector<std::size_t> positive_slot(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& item = batch.items[i];
    positive_slot[i] = add_to_pool(item.positive);
    for (const auto& neg : item.negatives) {
      if (neg.id == item.positive.id && neg.corpus_id == item.positive.corpus_id) {
        throw data_error("conflicting_labels", item.query.id + "/" + neg.id);
      }
      add_to_pool(neg);
    }
  }
  const std::size_t m = pool.size();

  std::vector<DualTrace> queries;
  queries.reserve(n);
  for (const auto& item : batch.items) {
    queries.push_back(dual_forward(
        params, featurize(compose_input(item.instruction, item.query), params.num_buckets,
                          options.max_len)));
  }
  std::vector<DualTrace> docs;
  docs.reserve(m);
  for (const Document* d : pool) {
    docs.push_back(dual_forward(
        params, featurize(document_text(*d, options), params.num_buckets, options.max_len)));
  }

  const double inv_tau = 1.0 / params.temperature;
  std::vector<double> coeff(n * m);  // d loss / d score
  double loss = 0.0;
  std::vector<double> z(m);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < m; ++j) {
      z[j] = dot(queries[i].embedding.values, docs[j].embedding.values) * inv_tau;
      mx = std::max(mx, z[j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) sum += std::exp(z[j] - mx);
    const double lse = mx + std::log(sum);
    loss += lse - z[positive_slot[i]];
    for (std::size_t j = 0; j < m; ++j) {
      const double p = std::exp(z[j] - lse);
      coeff[i * m + j] = (p - (j == positive_slot[i] ? 1.0 : 0.0)) * inv_tau / static_cast<double>(n);
    }
  }

  DualLossGrad out;
  out.loss = loss / static_cast<double>(n);
  if (!std::isfinite(out.loss)) throw numeric_error("numeric_overflow", "dual loss");
  out.grads.empty_row.assign(dim, 0.0);
  out.grads.projection.assign(dim * dim, 0.0);

  std::vector<double> d_emb(dim);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(d_emb.begin(), d_emb.end(), 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      const double g = coeff[i * m + j];
      for (std::size_t c = 0; c < dim; ++c) d_emb[c] += g * docs[j].embedding.values[c];
    }
    backprop_dual(params, queries[i], d_emb, out.grads);
  }
  for (std::size_t j = 0; j < m; ++j) {
    std::fill(d_emb.begin(), d_emb.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double g = coeff[i * m + j];
      for (std::size_t c = 0; c < dim; ++c) d_emb[c] += g * queries[i].embedding.values[c];
    }
    backprop_dual(params, docs[j], d_emb, out.grads);
  }
  return out;
}

CrossLossGrad cross_loss_grad(const CrossParams& params, const CrossBatch& batch,
                              const EncoderOptions& options) {
  if (batch.items.empty()) throw usage_error("empty_batch");
  const std::size_t n = batch.items.size();
  const std::size_t dim = params.dim;
  const std::size_t hd = params.hidden_dim;

  CrossLossGrad out;
  out.grads.hidden.assign(dim * hd, 0.0);
  out.grads.hidden_bias.assign(hd, 0.0);
  out.grads.output.assign(hd, 0.0);

  std::vector<double> da(hd);
  std::vector<double> dx(dim);
  double loss = 0.0;
  for (const auto& item : batch.items) {
    if (item.label != 0 && item.label != 1) throw usage_error("bad_label", item.query.id);
    const auto trace = cross_forward(
        params, featurize(cross_input(item.instruction, item.query, item.doc, options),
                          params.num_buckets, options.max_len));
    const double p = trace.probability;
    const double pc = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
    loss -= item.label == 1 ? std::log(pc) : std::log(1.0 - pc);
    if (p <= kProbabilityClamp || p >= 1.0 - kProbabilityClamp) continue;

    const double dz = (p - static_cast<double>(item.label)) / static_cast<double>(n);
    out.grads.output_bias += dz;
    for (std::size_t j = 0; j < hd; ++j) {
      const double h = trace.hidden[j];
      out.grads.output[j] += dz * h;
      da[j] = dz * params.output[j] * (1.0 - h * h);
      out.grads.hidden_bias[j] += da[j];
    }
    for (std::size_t k = 0; k < dim; ++k) {
      const double* wrow = params.hidden.data() + k * hd;
      double* grow = out.grads.hidden.data() + k * hd;
      double s = 0.0;
      for (std::size_t j = 0; j < hd; ++j) {
        grow[j] += trace.pooled[k] * da[j];
        s += wrow[j] * da[j];
      }
      dx[k] = s;
    }
    if (!trace.features.empty()) scatter_pooled(trace.features, dx, dim, out.grads.table);
  }
  out.loss = loss / static_cast<double>(n);
  if (!std::isfinite(out.loss)) throw numeric_error("numeric_overflow", "cross loss");
  return out;
}

void TrainConfig::validate() const {
  if (batch_size == 0 || negatives_per_positive == 0 || pos_neg_ratio_cross == 0) {
    throw usage_error("bad_train_config", "counts must be >= 1");
  }
  if (!(hard_or_uf_fraction >= 0.0 && hard_or_uf_fraction <= 1.0)) {
    throw usage_error("bad_train_config", "hard_or_uf_fraction must be in [0,1]");
  }
  if (!(learning_rate > 0.0) || !(temperature > 0.0)) {
    throw usage_error("bad_train_config", "learning_rate and temperature must be > 0");
  }
  sampling.validate();
}

double learning_rate_at(const TrainConfig& config, std::size_t step) {
  if (config.warmup_steps == 0) return config.learning_rate;
  const double ramp = static_cast<double>(step + 1) / static_cast<double>(config.warmup_steps);
  return config.learning_rate * std::min(1.0, ramp);
}

TrainResult<DualParams> train_dual(DualParams init, const TrainConfig& config,
                                   const std::vector<TrainingInstance>& data, const TaskSet& tasks,
                                   const EncoderOptions& options) {
  config.validate();
  TrainResult<DualParams> result{std::move(init), {}, 0};
  const auto usable = usable_instances(data);
  result.skipped_instances = data.size() - usable.size();
  if (config.max_steps == 0) return result;
  if (usable.empty()) throw data_error("no_training_data");

  Rng rng(derive_seed(config.seed, "train.dual"));
  BatchSampler sampler(data, usable, config.task_homogeneous_batches, rng);
  UfBudget budget(config.sampling.uf_pair_cap);
  SparseAdam table_adam;
  AdamSlots empty_slots, projection_slots;
  auto& params = result.params;

  for (std::size_t step = 0; step < config.max_steps; ++step) {
    DualBatch batch;
    batch.items.reserve(config.batch_size);
    for (const auto idx : sampler.next(data, config.batch_size)) {
      const auto& inst = data[idx];
      const Task& task = tasks.task(inst.task_id);
      DualItem item;
      item.instruction = pick_instruction(task, config.use_instructions, rng);
      item.query = resolve_query(task, inst.query_id);
      item.positive = resolve_doc(task, inst.positives[rng.below(inst.positives.size())]);
      const auto neg = sample_negatives(inst, task, config.sampling, config.negatives_per_positive,
                                        config.hard_or_uf_fraction, budget, rng);
      for (const auto& id : neg.hard) item.negatives.push_back(resolve_doc(task, id));
      for (const auto& key : neg.unfollowing) item.negatives.push_back(tasks.doc(key));
      for (const auto& id : neg.random) item.negatives.push_back(resolve_doc(task, id));
      batch.items.push_back(std::move(item));
    }
    const auto lg = dual_loss_grad(params, batch, options);
    const double lr = learning_rate_at(config, step);
    const AdamStep adam(config, lr, step + 1);
    table_adam.apply(params.table, lg.grads.table, adam);
    adam.apply(params.empty_row, lg.grads.empty_row, empty_slots);
    adam.apply(params.projection, lg.grads.projection, projection_slots);
    result.log.push_back({step, lg.loss, lr});
  }
  return result;
}

TrainResult<CrossParams> train_cross(CrossParams init, const TrainConfig& config,
                                     const std::vector<TrainingInstance>& data,
                                     const TaskSet& tasks, const EncoderOptions& options) {
  config.validate();
  TrainResult<CrossParams> result{std::move(init), {}, 0};
  const auto usable = usable_instances(data);
  result.skipped_instances = data.size() - usable.size();
  if (config.max_steps == 0) return result;
  if (usable.empty()) throw data_error("no_training_data");

  Rng rng(derive_seed(config.seed, "train.cross"));
  BatchSampler sampler(data, usable, config.task_homogeneous_batches, rng);
  UfBudget budget(config.sampling.uf_pair_cap);
  SparseAdam table_adam;
  AdamSlots hidden_slots, hidden_bias_slots, output_slots, output_bias_slots;
  auto& params = result.params;

  for (std::size_t step = 0; step < config.max_steps; ++step) {
    CrossBatch batch;
    for (const auto idx : sampler.next(data, config.batch_size)) {
      const auto& inst = data[idx];
      const Task& task = tasks.task(inst.task_id);
      const auto instruction = pick_instruction(task, config.use_instructions, rng);
      const Query& query = resolve_query(task, inst.query_id);
      batch.items.push_back(
          {instruction, query, resolve_doc(task, inst.positives[rng.below(inst.positives.size())]),
           1});
      const auto neg = sample_negatives(inst, task, config.sampling, config.pos_neg_ratio_cross,
                                        config.hard_or_uf_fraction, budget, rng);
      for (const auto& id : neg.hard) batch.items.push_back({instruction, query, resolve_doc(task, id), 0});
      for (const auto& key : neg.unfollowing) batch.items.push_back({instruction, query, tasks.doc(key), 0});
      for (const auto& id : neg.random) batch.items.push_back({instruction, query, resolve_doc(task, id), 0});
    }
    const auto lg = cross_loss_grad(params, batch, options);
    const double lr = learning_rate_at(config, step);
    const AdamStep adam(config, lr, step + 1);
    table_adam.apply(params.table, lg.grads.table, adam);
    adam.apply(params.hidden, lg.grads.hidden, hidden_slots);
    adam.apply(params.hidden_bias, lg.grads.hidden_bias, hidden_bias_slots);
    adam.apply(params.output, lg.grads.output, output_slots);
    double ob = params.output_bias;
    const double ob_grad = lg.grads.output_bias;
    adam.apply(std::span<double>(&ob, 1), std::span<const double>(&ob_grad, 1), output_bias_slots);
    params.output_bias = ob;
    result.log.push_back({step, lg.loss, lr});
  }
  return result;
}

void write_train_log(std::ostream& out, const std::vector<TrainLogEntry>& log) {
  for (const auto& e : log) {
    nlohmann::ordered_json j;
    j["step"] = e.step;
    j["loss"] = e.loss;
    j["lr"] = e.lr;
    out << j.dump() << '\n';
  }
}

std::vector<TrainingInstance> distill_refresh(const CrossParams& cross,
                                              const std::vector<TrainingInstance>& data,
                                              const TaskSet& tasks, const DistillConfig& config,
                                              const CandidateFn& extra_candidates,
                                              DistillReport* report, const EncoderOptions& options) {
  if (!(config.threshold > 0.0 && config.threshold < 1.0) ||
      !(config.promote_threshold > config.threshold && config.promote_threshold < 1.0)) {
    throw usage_error("bad_distill_config", "need 0 < threshold < promote_threshold < 1");
  }
  DistillReport local;
  std::vector<TrainingInstance> out;
  out.reserve(data.size());
  for (const auto& inst : data) {
    const Task& task = tasks.task(inst.task_id);
    const Query& query = resolve_query(task, inst.query_id);
    const InstructionSlot instruction =
        task.instructions.empty() ? InstructionSlot{NoInstruction{}} : task.instructions.front();

    std::vector<std::string> candidates;
    std::set<std::string> seen;
    auto consider = [&](const std::string& id) {
      if (seen.insert(id).second) candidates.push_back(id);
    };
    for (const auto& id : inst.positives) consider(id);
    for (const auto& id : inst.hard_negatives) consider(id);
    if (extra_candidates) {
      for (const auto& id : extra_candidates(inst)) consider(id);
    }

    TrainingInstance next = inst;
    std::size_t moved = 0, promoted = 0;
    for (const auto& id : candidates) {
      const double s = score_cross(cross, instruction, query, resolve_doc(task, id), options);
      const auto in = [&](const std::vector<std::string>& v) {
        return std::find(v.begin(), v.end(), id) != v.end();
      };
      if (s < config.threshold) {
        if (in(next.positives)) {
          std::erase(next.positives, id);
        }
        if (!in(next.hard_negatives)) {
          next.hard_negatives.push_back(id);
          ++moved;
        }
      } else if (s > config.promote_threshold) {
        if (!in(next.positives) && !in(next.hard_negatives) && !in(next.random_negatives)) {
          next.positives.push_back(id);
          ++promoted;
        }
      }
    }
    if (next.positives.empty()) {
      local.flagged.push_back(inst.task_id + "/" + inst.query_id);
      out.push_back(inst);
      continue;
    }
    local.moved_to_hard += moved;
    local.promoted += promoted;
    out.push_back(std::move(next));
  }
  if (report != nullptr) *report = std::move(local);
  return out;
}

}  // namespace tartan
