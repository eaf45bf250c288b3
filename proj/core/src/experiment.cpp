#include "tartan/experiment.hpp"

#include <algorithm>
#include <memory>

#include "nlohmann/json.hpp"
#include "tartan/error.hpp"
#include "tartan/rng.hpp"

namespace tartan {

ExperimentConfig::ExperimentConfig() {
  // Sized for the synthetic benchmark: a short bootstrap run leaves the
  // reranker above the denoising threshold on nearly every candidate.
  bootstrap.use_instructions = false;
  bootstrap.max_steps = 3000;
  bootstrap.learning_rate = 5e-3;
  bootstrap.hard_or_uf_fraction = 0.0;
  dual.max_steps = 3000;
  dual.learning_rate = 5e-3;
  dual.negatives_per_positive = 7;
  cross.max_steps = 3000;
  cross.learning_rate = 5e-3;
  cross.pos_neg_ratio_cross = 4;
  // The special negative slot draws uniformly from hard + unfollowing, so a
  // deep unfollowing pool crowds out the hard negatives.
  mining.uf_top_k = 5;
}

void ExperimentConfig::validate() const {
  if (num_buckets == 0 || dim == 0 || hidden_dim == 0) {
    throw usage_error("bad_config", "num_buckets, dim and hidden_dim must be >= 1");
  }
  if (k == 0) throw usage_error("bad_k", "k must be >= 1");
  if (rerank_depth == 0) throw usage_error("bad_config", "rerank_depth must be >= 1");
  mining.validate();
  bootstrap.validate();
  dual.validate();
  cross.validate();
}

std::vector<std::string> uf_partners(const ExperimentConfig& config, const Task& task,
                                     const std::vector<Task>& tasks) {
  if (const auto it = config.uf_pairs.find(task.id); it != config.uf_pairs.end()) {
    for (const auto& c : it->second) {
      if (c == task.corpus_id()) throw usage_error("uf_same_corpus", task.id);
    }
    return it->second;
  }
  std::vector<std::string> out;
  for (const auto& t : tasks) {
    if (t.corpus_id() != task.corpus_id() &&
        std::find(out.begin(), out.end(), t.corpus_id()) == out.end()) {
      out.push_back(t.corpus_id());
    }
  }
  return out;
}

namespace {

TrainConfig seeded(TrainConfig c, std::uint64_t seed, std::string_view label) {
  c.seed = derive_seed(seed, label);
  return c;
}

const Corpus& find_corpus(const std::vector<Task>& tasks, const std::string& corpus_id) {
  for (const auto& t : tasks) {
    if (t.corpus_id() == corpus_id) return t.corpus;
  }
  throw usage_error("unknown_corpus", corpus_id);
}

RetrieveFn bm25_retriever(std::shared_ptr<const Bm25Stats> stats) {
  return [stats](const std::string& text, std::size_t k) { return bm25_search(*stats, text, k); };
}

}  // namespace

CrossParams train_bootstrap_reranker(const ExperimentConfig& config, const std::vector<Task>& tasks) {
  std::vector<TrainingInstance> data;
  for (const auto& t : tasks) {
    auto inst = build_instances(t, {}, {}, 0, 0);
    data.insert(data.end(), inst.begin(), inst.end());
  }
  const TaskSet set(tasks);
  const auto init = CrossParams::init(config.num_buckets, config.dim, config.hidden_dim,
                                      derive_seed(config.seed, "bootstrap.init"));
  auto cfg = seeded(config.bootstrap, config.seed, "bootstrap");
  cfg.use_instructions = false;
  return train_cross(init, cfg, data, set, config.encoder).params;
}

PreparedData prepare_training_data(const ExperimentConfig& config, const std::vector<Task>& tasks,
                                   const CrossParams& reranker) {
  PreparedData out;
  std::map<std::string, std::shared_ptr<const Bm25Stats>> stats;
  auto stats_for = [&](const Corpus& c) {
    auto& s = stats[c.id()];
    if (!s) s = std::make_shared<const Bm25Stats>(build_bm25(c, config.bm25));
    return s;
  };
  const RerankFn rerank_fn = [&](const InstructionSlot& slot, const Query& q, const Document& d) {
    return score_cross(reranker, slot, q, d, config.encoder);
  };
  for (const auto& task : tasks) {
    PoolMap hard;
    if (config.use_hard_negatives) {
      MiningReport report;
      hard = mine_hard_negatives(bm25_retriever(stats_for(task.corpus)), rerank_fn, task,
                                 config.mining, NoInstruction{}, &report);
      out.hard_report.queries += report.queries;
      out.hard_report.empty_queries += report.empty_queries;
      out.hard_report.candidates += report.candidates;
      out.hard_report.dropped_gold += report.dropped_gold;
      out.hard_report.dropped_above_threshold += report.dropped_above_threshold;
      out.hard_report.kept += report.kept;
    }
    std::vector<std::pair<std::string, PoolMap>> unfollowing;
    if (config.use_unfollowing) {
      for (const auto& corpus_id : uf_partners(config, task, tasks)) {
        const Corpus& foreign = find_corpus(tasks, corpus_id);
        unfollowing.emplace_back(
            corpus_id, mine_unfollowing(bm25_retriever(stats_for(foreign)), task, foreign,
                                        config.mining.uf_top_k));
      }
    }
    auto inst = build_instances(task, hard, unfollowing, config.random_pool_size,
                                derive_seed(config.seed, "instances"));
    for (const auto& i : inst) out.unfollowing += i.unfollowing_negatives.size();
    out.instances.insert(out.instances.end(), inst.begin(), inst.end());
  }
  return out;
}

DualParams train_dual_on(const ExperimentConfig& config, const std::vector<Task>& tasks,
                         const std::vector<TrainingInstance>& instances) {
  auto dual_cfg = seeded(config.dual, config.seed, "dual");
  dual_cfg.sampling = config.mining;
  const auto init = DualParams::init(config.num_buckets, config.dim, dual_cfg.temperature,
                                     derive_seed(config.seed, "dual.init"));
  return train_dual(init, dual_cfg, instances, TaskSet(tasks), config.encoder).params;
}

std::vector<TrainingInstance> without_unfollowing(std::vector<TrainingInstance> instances) {
  for (auto& i : instances) i.unfollowing_negatives.clear();
  return instances;
}

TrainedModels train_models(const ExperimentConfig& config, const std::vector<Task>& tasks,
                           bool train_cross_model) {
  config.validate();
  const TaskSet set(tasks);
  const CrossParams bootstrap = train_bootstrap_reranker(config, tasks);
  TrainedModels out;
  out.data = prepare_training_data(config, tasks, bootstrap);

  out.dual = train_dual_on(config, tasks, out.data.instances);

  if (train_cross_model) {
    auto cross_cfg = seeded(config.cross, config.seed, "cross");
    cross_cfg.sampling = config.mining;
    const auto cross_init = CrossParams::init(config.num_buckets, config.dim, config.hidden_dim,
                                              derive_seed(config.seed, "cross.init"));
    out.cross = train_cross(cross_init, cross_cfg, out.data.instances, set, config.encoder).params;
  } else {
    out.cross = bootstrap;
  }
  return out;
}

InstructionSlot test_instruction(const Task& task, bool use_instructions) {
  if (!use_instructions || task.instructions.empty()) return NoInstruction{};
  return task.instructions.front();
}

RetrievalSystem dense_system(const DualParams& dual, bool use_instructions,
                             const EncoderOptions& options, std::size_t threads) {
  return [&dual, use_instructions, options, threads](const Corpus& corpus) -> SearchFn {
    auto index = std::make_shared<const DenseIndex>(build_index(corpus, dual, options, threads));
    return [&dual, index, use_instructions, options](const Task& task, const Query& q, std::size_t k) {
      const auto e = embed(dual, compose_input(test_instruction(task, use_instructions), q), options);
      return search_topk(*index, e, k);
    };
  };
}

RetrievalSystem pipeline_system(const DualParams& dual, const CrossParams& cross,
                                bool use_instructions, std::size_t depth,
                                const EncoderOptions& options, std::size_t threads) {
  return [&dual, &cross, use_instructions, depth, options, threads](const Corpus& corpus) -> SearchFn {
    auto index = std::make_shared<const DenseIndex>(build_index(corpus, dual, options, threads));
    return [&dual, &cross, &corpus, index, use_instructions, depth, options](
               const Task& task, const Query& q, std::size_t k) {
      return pipeline_retrieve(dual, &cross, test_instruction(task, use_instructions), q, *index,
                               corpus, std::max(depth, k), k, options);
    };
  };
}

RetrievalSystem bm25_system(Bm25Params params, bool use_instructions) {
  return [params, use_instructions](const Corpus& corpus) -> SearchFn {
    auto stats = std::make_shared<const Bm25Stats>(build_bm25(corpus, params));
    return [stats, use_instructions](const Task& task, const Query& q, std::size_t k) {
      return bm25_search(*stats, compose_input(test_instruction(task, use_instructions), q), k);
    };
  };
}

const AblationCell& AblationGrid::at(bool train_instructions, bool test_instructions) const {
  for (const auto& c : cells) {
    if (c.train_instructions == train_instructions && c.test_instructions == test_instructions) {
      return c;
    }
  }
  throw usage_error("missing_cell");
}

AblationGrid ablate_instructions(const ExperimentConfig& config, const Benchmark& benchmark) {
  for (const auto* tasks : {&benchmark.train, &benchmark.eval}) {
    for (const auto& t : *tasks) {
      if (t.instructions.empty()) throw data_error("missing_instruction", t.id);
    }
  }
  config.validate();
  // Mining never looks at instructions, so both variants share one pass.
  const auto data =
      prepare_training_data(config, benchmark.train, train_bootstrap_reranker(config, benchmark.train));
  AblationGrid grid;
  for (const bool train_instr : {true, false}) {
    ExperimentConfig cfg = config;
    cfg.dual.use_instructions = train_instr;
    const auto dual = train_dual_on(cfg, benchmark.train, data.instances);
    for (const bool test_instr : {true, false}) {
      const auto system = dense_system(dual, test_instr, config.encoder, config.threads);
      grid.cells.push_back({train_instr, test_instr,
                            evaluate_pooled(system, benchmark.eval, config.metric, config.k,
                                            config.threads)});
    }
  }
  return grid;
}

Benchmark synthetic_benchmark(const SynthSpec& eval_spec, std::size_t train_queries_per_task,
                              std::size_t train_docs_per_task) {
  SynthSpec train_spec = eval_spec;
  train_spec.seed = derive_seed(eval_spec.seed, "train");
  train_spec.queries_per_task = train_queries_per_task;
  train_spec.docs_per_task = train_docs_per_task;
  return {generate_benchmark(train_spec), generate_benchmark(eval_spec)};
}

std::string grid_json(const AblationGrid& grid) {
  auto cells = nlohmann::ordered_json::array();
  for (const auto& c : grid.cells) {
    nlohmann::ordered_json j;
    j["train_instructions"] = c.train_instructions;
    j["test_instructions"] = c.test_instructions;
    j["metric"] = std::string(to_string(c.report.metric));
    j["k"] = c.report.k;
    j["closed_avg"] = c.report.closed_avg;
    j["pooled_avg"] = c.report.pooled_avg;
    j["delta"] = c.report.delta;
    cells.push_back(std::move(j));
  }
  nlohmann::ordered_json out;
  out["cells"] = std::move(cells);
  return out.dump(2) + "\n";
}

}  // namespace tartan
