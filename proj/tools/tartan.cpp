// tartan: command-line front end. Every command reads and writes files only,
// so runs compose through the file system.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nlohmann/json.hpp"
#include "tartan/checkpoint.hpp"
#include "tartan/config.hpp"
#include "tartan/error.hpp"
#include "tartan/evaluation.hpp"
#include "tartan/experiment.hpp"
#include "tartan/io.hpp"
#include "tartan/parallel.hpp"
#include "tartan/rng.hpp"
#include "tartan/search.hpp"
#include "tartan/synth.hpp"
#include "tartan/training.hpp"

namespace fs = std::filesystem;
using namespace tartan;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;

  Settings resolve() const {
    SettingList overrides;
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw usage_error("bad_set", kv);
      overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) overrides.emplace_back("seed", std::to_string(*seed));
    const fs::path path(config_file);
    Settings s = resolve_settings(config_file.empty() ? nullptr : &path, overrides);
    if (threads || std::getenv("TARTAN_THREADS") != nullptr) {
      s.experiment.threads = resolve_threads(threads);
    }
    return s;
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_file, "key = value settings file");
  cmd->add_option("--set", c.sets, "override one setting, key=value (repeatable)");
  cmd->add_option("--seed", c.seed, "root seed");
  cmd->add_option("--threads", c.threads, "worker threads (default: $TARTAN_THREADS or 1)");
}

std::map<std::string, std::string> corpus_of_tasks(const std::vector<Task>& tasks) {
  std::map<std::string, std::string> out;
  for (const auto& t : tasks) out[t.id] = t.corpus_id();
  return out;
}

std::vector<TrainingInstance> read_pools(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("file_not_found", path.string());
  return read_instances(in);
}

void write_pools(const fs::path& path, const std::vector<TrainingInstance>& data,
                 const std::vector<Task>& tasks) {
  std::ostringstream out;
  write_instances(out, data, corpus_of_tasks(tasks));
  write_file(path, out.str());
}

void check_tasks(const std::vector<Task>& tasks) {
  for (const auto& t : tasks) {
    const auto report = validate_task(t);
    if (!report.ok()) {
      const auto& issue = report.issues.front();
      throw data_error(issue.code, t.id + ": " + issue.detail);
    }
  }
}

std::vector<Task> load_checked(const fs::path& dir) {
  auto tasks = load_benchmark(dir);
  if (tasks.empty()) throw data_error("empty_benchmark", dir.string());
  check_tasks(tasks);
  return tasks;
}

std::vector<std::pair<std::string, std::string>> read_pairs(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("file_not_found", path.string());
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  std::size_t line_no = 0;
  const bool jsonl = path.extension() == ".jsonl" || path.extension() == ".json";
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (jsonl) {
      try {
        const auto j = nlohmann::json::parse(line);
        pairs.emplace_back(j.at("source").get<std::string>(), j.at("target").get<std::string>());
      } catch (const nlohmann::json::exception&) {
        throw data_error("bad_jsonl", path.string() + ":" + std::to_string(line_no));
      }
    } else {
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw data_error("bad_pairs", path.string() + ":" + std::to_string(line_no));
      pairs.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
  }
  return pairs;
}

void write_log(const std::string& path, const std::vector<TrainLogEntry>& log) {
  if (path.empty()) return;
  std::ostringstream out;
  write_train_log(out, log);
  write_file(path, out.str());
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_file(path, text);
  }
}

int exit_code(ErrorKind kind) { return static_cast<int>(kind); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instruction-aware retrieval toolkit"};
  app.require_subcommand(1);
  Common common;

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic multi-task benchmark");
  add_common(synth, common);
  std::string synth_out;
  synth->add_option("--out", synth_out, "benchmark directory")->required();

  // ingest
  auto* ingest = app.add_subcommand("ingest", "turn (source, target) pairs into a retrieval task");
  add_common(ingest, common);
  std::string pairs_file, rule_name, ingest_out, task_id = "task";
  ingest->add_option("--pairs", pairs_file, "pairs as TSV (source<TAB>target) or JSONL {source, target}")->required();
  ingest->add_option("--rule", rule_name, "unification rule")->required();
  ingest->add_option("--task-id", task_id, "task id");
  ingest->add_option("--out", ingest_out, "benchmark directory to add the task to")->required();

  // mine
  auto* mine = app.add_subcommand("mine", "mine hard and unfollowing negatives");
  add_common(mine, common);
  std::string bench_dir, pools_out, reranker_ckpt;
  mine->add_option("--bench", bench_dir, "training benchmark directory")->required();
  mine->add_option("--reranker", reranker_ckpt, "cross checkpoint used for denoising (default: train one)");
  mine->add_option("--out", pools_out, "pools JSONL")->required();

  // train-dual / train-cross
  std::string pools_in, ckpt_out, log_out, init_ckpt;
  auto* train_dual_cmd = app.add_subcommand("train-dual", "train the dual encoder");
  add_common(train_dual_cmd, common);
  train_dual_cmd->add_option("--bench", bench_dir)->required();
  train_dual_cmd->add_option("--pools", pools_in)->required();
  train_dual_cmd->add_option("--out", ckpt_out, "checkpoint")->required();
  train_dual_cmd->add_option("--init", init_ckpt, "continue from this checkpoint");
  train_dual_cmd->add_option("--log", log_out, "training log (JSONL)");

  auto* train_cross_cmd = app.add_subcommand("train-cross", "train the cross encoder");
  add_common(train_cross_cmd, common);
  train_cross_cmd->add_option("--bench", bench_dir)->required();
  train_cross_cmd->add_option("--pools", pools_in)->required();
  train_cross_cmd->add_option("--out", ckpt_out, "checkpoint")->required();
  train_cross_cmd->add_option("--init", init_ckpt, "continue from this checkpoint");
  train_cross_cmd->add_option("--log", log_out, "training log (JSONL)");

  // distill
  auto* distill = app.add_subcommand("distill", "relabel pools with an instruction-aware cross encoder");
  add_common(distill, common);
  std::string cross_ckpt, report_out;
  distill->add_option("--bench", bench_dir)->required();
  distill->add_option("--pools", pools_in)->required();
  distill->add_option("--cross", cross_ckpt)->required();
  distill->add_option("--out", pools_out, "refreshed pools JSONL")->required();
  distill->add_option("--report", report_out, "summary JSON");

  // index
  auto* index_cmd = app.add_subcommand("index", "embed a task corpus");
  add_common(index_cmd, common);
  std::string task_dir, dual_ckpt, index_file;
  index_cmd->add_option("--task", task_dir, "task directory")->required();
  index_cmd->add_option("--dual", dual_ckpt)->required();
  index_cmd->add_option("--out", index_file)->required();

  // search
  auto* search = app.add_subcommand("search", "retrieve for every query of a task (TREC run)");
  add_common(search, common);
  std::string run_out;
  bool no_instructions = false;
  std::optional<std::size_t> depth_flag, k_flag;
  search->add_option("--task", task_dir)->required();
  search->add_option("--index", index_file)->required();
  search->add_option("--dual", dual_ckpt)->required();
  search->add_option("--cross", cross_ckpt, "rerank the first stage with this cross encoder");
  search->add_option("--depth", depth_flag, "first-stage depth when reranking");
  search->add_option("--k", k_flag, "hits per query");
  search->add_flag("--no-instructions", no_instructions, "search with the bare query");
  search->add_option("--out", run_out, "run file (default stdout)");

  // rerank
  auto* rerank_cmd = app.add_subcommand("rerank", "rerank a TREC run with a cross encoder");
  add_common(rerank_cmd, common);
  std::string run_in;
  rerank_cmd->add_option("--task", task_dir)->required();
  rerank_cmd->add_option("--run", run_in)->required();
  rerank_cmd->add_option("--cross", cross_ckpt)->required();
  rerank_cmd->add_option("--k", k_flag, "hits kept per query");
  rerank_cmd->add_flag("--no-instructions", no_instructions);
  rerank_cmd->add_option("--out", run_out, "run file (default stdout)");

  // eval
  auto* eval = app.add_subcommand("eval", "closed vs pooled evaluation");
  add_common(eval, common);
  std::string format = "json";
  bool use_bm25 = false;
  eval->add_option("--bench", bench_dir)->required();
  eval->add_option("--dual", dual_ckpt, "dual checkpoint");
  eval->add_option("--cross", cross_ckpt, "rerank with this cross encoder");
  eval->add_flag("--bm25", use_bm25, "evaluate BM25 instead of a dual encoder");
  eval->add_flag("--no-instructions", no_instructions);
  eval->add_option("--format", format, "json | tsv")->check(CLI::IsMember({"json", "tsv"}));
  eval->add_option("--out", report_out, "report file (default stdout)");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "train/test instruction ablation grid");
  add_common(ablate, common);
  std::string eval_dir;
  ablate->add_option("--train", bench_dir, "training benchmark")->required();
  ablate->add_option("--eval", eval_dir, "evaluation benchmark")->required();
  ablate->add_option("--out", report_out, "grid JSON (default stdout)");

  // config schema
  auto* schema_cmd = app.add_subcommand("config-keys", "list every accepted setting");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (schema_cmd->parsed()) {
      for (const auto& [key, desc] : setting_schema()) std::cout << key << "\t" << desc << "\n";
      return 0;
    }
    const Settings settings = common.resolve();
    const ExperimentConfig& cfg = settings.experiment;

    if (synth->parsed()) {
      save_benchmark(synth_out, generate_benchmark(settings.synth));
    } else if (ingest->parsed()) {
      const auto rule = parse_unification_rule(rule_name);
      if (!rule) throw usage_error("unknown_rule", rule_name);
      const Task task = unify_dataset(read_pairs(pairs_file), *rule, task_id);
      check_tasks({task});
      save_task(fs::path(ingest_out) / task.id, task);
    } else if (mine->parsed()) {
      const auto tasks = load_checked(bench_dir);
      const CrossParams reranker = reranker_ckpt.empty() ? train_bootstrap_reranker(cfg, tasks)
                                                         : load_cross_checkpoint(reranker_ckpt);
      const auto data = prepare_training_data(cfg, tasks, reranker);
      write_pools(pools_out, data.instances, tasks);
      std::cerr << "mined " << data.instances.size() << " instances, " << data.hard_report.kept
                << " hard, " << data.unfollowing << " unfollowing\n";
    } else if (train_dual_cmd->parsed()) {
      const auto tasks = load_checked(bench_dir);
      const auto data = read_pools(pools_in);
      auto tc = cfg.dual;
      tc.seed = derive_seed(cfg.seed, "dual");
      tc.sampling = cfg.mining;
      const DualParams init = init_ckpt.empty()
                                  ? DualParams::init(cfg.num_buckets, cfg.dim, tc.temperature,
                                                     derive_seed(cfg.seed, "dual.init"))
                                  : load_dual_checkpoint(init_ckpt);
      const auto result = train_dual(init, tc, data, TaskSet(tasks), cfg.encoder);
      if (result.skipped_instances > 0) {
        std::cerr << "warning: skipped " << result.skipped_instances << " instances without positives\n";
      }
      save_checkpoint(ckpt_out, result.params);
      write_log(log_out, result.log);
    } else if (train_cross_cmd->parsed()) {
      const auto tasks = load_checked(bench_dir);
      const auto data = read_pools(pools_in);
      auto tc = cfg.cross;
      tc.seed = derive_seed(cfg.seed, "cross");
      tc.sampling = cfg.mining;
      const CrossParams init = init_ckpt.empty()
                                   ? CrossParams::init(cfg.num_buckets, cfg.dim, cfg.hidden_dim,
                                                       derive_seed(cfg.seed, "cross.init"))
                                   : load_cross_checkpoint(init_ckpt);
      const auto result = train_cross(init, tc, data, TaskSet(tasks), cfg.encoder);
      if (result.skipped_instances > 0) {
        std::cerr << "warning: skipped " << result.skipped_instances << " instances without positives\n";
      }
      save_checkpoint(ckpt_out, result.params);
      write_log(log_out, result.log);
    } else if (distill->parsed()) {
      const auto tasks = load_checked(bench_dir);
      const auto cross = load_cross_checkpoint(cross_ckpt);
      DistillReport report;
      const auto refreshed = distill_refresh(cross, read_pools(pools_in), TaskSet(tasks), cfg.distill,
                                             {}, &report, cfg.encoder);
      write_pools(pools_out, refreshed, tasks);
      nlohmann::ordered_json j;
      j["moved_to_hard"] = report.moved_to_hard;
      j["promoted"] = report.promoted;
      j["flagged"] = report.flagged;
      if (!report_out.empty()) write_file(report_out, j.dump(2) + "\n");
    } else if (index_cmd->parsed()) {
      const Task task = load_task(task_dir);
      const auto dual = load_dual_checkpoint(dual_ckpt);
      save_index(index_file, build_index(task.corpus, dual, cfg.encoder, cfg.threads));
    } else if (search->parsed()) {
      const Task task = load_task(task_dir);
      const auto dual = load_dual_checkpoint(dual_ckpt);
      const auto index = load_index(index_file);
      if (index.params_fingerprint != fingerprint(dual)) {
        throw data_error("index_mismatch", "index was built with different dual parameters");
      }
      std::optional<CrossParams> cross;
      if (!cross_ckpt.empty()) cross = load_cross_checkpoint(cross_ckpt);
      const std::size_t k = k_flag.value_or(cfg.k);
      const std::size_t depth = depth_flag.value_or(cfg.rerank_depth);
      const auto slot = test_instruction(task, !no_instructions);
      std::vector<std::vector<RankedHit>> hits(task.queries.size());
      parallel_for(task.queries.size(), cfg.threads, [&](std::size_t i) {
        hits[i] = pipeline_retrieve(dual, cross ? &*cross : nullptr, slot, task.queries[i], index,
                                    task.corpus, std::max(depth, k), k, cfg.encoder);
      });
      std::ostringstream out;
      for (std::size_t i = 0; i < task.queries.size(); ++i) {
        write_trec_run(out, task.queries[i].id, hits[i], cross ? "dual+cross" : "dual");
      }
      emit(run_out, out.str());
    } else if (rerank_cmd->parsed()) {
      const Task task = load_task(task_dir);
      const auto cross = load_cross_checkpoint(cross_ckpt);
      std::ifstream in(run_in);
      if (!in) throw data_error("file_not_found", run_in);
      const auto run = read_trec_run(in);
      const auto slot = test_instruction(task, !no_instructions);
      std::ostringstream out;
      for (const auto& [qid, first_stage] : run) {
        const Query* q = task.find_query(qid);
        if (q == nullptr) throw data_error("unknown_query", qid);
        auto hits = rerank(cross, slot, *q, first_stage, task.corpus, cfg.encoder);
        if (k_flag) finalize_ranking(hits, *k_flag);
        write_trec_run(out, qid, hits, "rerank");
      }
      emit(run_out, out.str());
    } else if (eval->parsed()) {
      const auto tasks = load_checked(bench_dir);
      RunReport report;
      if (use_bm25) {
        report = evaluate_pooled(bm25_system(cfg.bm25, !no_instructions), tasks, cfg.metric, cfg.k,
                                 cfg.threads);
      } else {
        if (dual_ckpt.empty()) throw usage_error("missing_dual", "--dual or --bm25 is required");
        const auto dual = load_dual_checkpoint(dual_ckpt);
        std::optional<CrossParams> cross;
        if (!cross_ckpt.empty()) cross = load_cross_checkpoint(cross_ckpt);
        const auto system = cross ? pipeline_system(dual, *cross, !no_instructions, cfg.rerank_depth,
                                                    cfg.encoder, cfg.threads)
                                  : dense_system(dual, !no_instructions, cfg.encoder, cfg.threads);
        report = evaluate_pooled(system, tasks, cfg.metric, cfg.k, cfg.threads);
      }
      emit(report_out, format == "json" ? report_json(report) : report_tsv(report));
    } else if (ablate->parsed()) {
      Benchmark bench{load_checked(bench_dir), load_checked(eval_dir)};
      emit(report_out, grid_json(ablate_instructions(cfg, bench)));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(ErrorKind::data);
  }
  return 0;
}
