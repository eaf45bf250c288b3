#include "tartan/config.hpp"

#include <charconv>
#include <functional>
#include <map>

#include "tartan/error.hpp"
#include "tartan/io.hpp"

namespace tartan {

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw usage_error("bad_setting_value", std::string(key) + " = " + std::string(value));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value);
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    const auto part = trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (!part.empty()) out.emplace_back(part);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

using Setter = std::function<void(Settings&, std::string_view key, std::string_view value)>;

struct Entry {
  std::string description;
  Setter set;
};

template <typename T, typename Get>
Setter number(Get get) {
  return [get](Settings& s, std::string_view k, std::string_view v) { get(s) = parse_number<T>(k, v); };
}

template <typename Get>
Setter boolean(Get get) {
  return [get](Settings& s, std::string_view k, std::string_view v) { get(s) = parse_bool(k, v); };
}

void add_train_keys(std::map<std::string, Entry, std::less<>>& m, const std::string& prefix,
                    TrainConfig& (*get)(Settings&)) {
  m[prefix + ".batch_size"] = {"instances per step", number<std::size_t>([get](Settings& s) -> auto& { return get(s).batch_size; })};
  m[prefix + ".negatives_per_positive"] = {"dual encoder negatives per positive",
      number<std::size_t>([get](Settings& s) -> auto& { return get(s).negatives_per_positive; })};
  m[prefix + ".hard_or_uf_fraction"] = {"share of negatives drawn from hard + unfollowing pools",
      number<double>([get](Settings& s) -> auto& { return get(s).hard_or_uf_fraction; })};
  m[prefix + ".pos_neg_ratio_cross"] = {"cross encoder negatives per positive",
      number<std::size_t>([get](Settings& s) -> auto& { return get(s).pos_neg_ratio_cross; })};
  m[prefix + ".learning_rate"] = {"peak Adam learning rate",
      number<double>([get](Settings& s) -> auto& { return get(s).learning_rate; })};
  m[prefix + ".warmup_steps"] = {"linear warmup steps",
      number<std::size_t>([get](Settings& s) -> auto& { return get(s).warmup_steps; })};
  m[prefix + ".max_steps"] = {"optimizer steps",
      number<std::size_t>([get](Settings& s) -> auto& { return get(s).max_steps; })};
  m[prefix + ".temperature"] = {"softmax temperature (dual encoder)",
      number<double>([get](Settings& s) -> auto& { return get(s).temperature; })};
  m[prefix + ".use_instructions"] = {"prepend task instructions to queries",
      boolean([get](Settings& s) -> auto& { return get(s).use_instructions; })};
  m[prefix + ".task_homogeneous_batches"] = {"draw every batch from a single task",
      boolean([get](Settings& s) -> auto& { return get(s).task_homogeneous_batches; })};
  m[prefix + ".adam_beta1"] = {"Adam beta1", number<double>([get](Settings& s) -> auto& { return get(s).adam_beta1; })};
  m[prefix + ".adam_beta2"] = {"Adam beta2", number<double>([get](Settings& s) -> auto& { return get(s).adam_beta2; })};
  m[prefix + ".adam_epsilon"] = {"Adam epsilon", number<double>([get](Settings& s) -> auto& { return get(s).adam_epsilon; })};
}

const std::map<std::string, Entry, std::less<>>& registry() {
  static const auto table = [] {
    std::map<std::string, Entry, std::less<>> m;
    m["seed"] = {"root seed for every random draw", [](Settings& s, std::string_view k, std::string_view v) {
                   s.experiment.seed = parse_number<std::uint64_t>(k, v);
                   s.synth.seed = s.experiment.seed;
                 }};
    m["threads"] = {"worker threads", number<std::size_t>([](Settings& s) -> auto& { return s.experiment.threads; })};
    m["num_buckets"] = {"feature hash buckets", number<std::uint32_t>([](Settings& s) -> auto& { return s.experiment.num_buckets; })};
    m["dim"] = {"embedding dimension", number<std::uint32_t>([](Settings& s) -> auto& { return s.experiment.dim; })};
    m["hidden_dim"] = {"cross encoder hidden units", number<std::uint32_t>([](Settings& s) -> auto& { return s.experiment.hidden_dim; })};
    m["max_len"] = {"tokens kept per text", number<std::size_t>([](Settings& s) -> auto& { return s.experiment.encoder.max_len; })};
    m["include_title"] = {"prepend document titles", boolean([](Settings& s) -> auto& { return s.experiment.encoder.include_title; })};

    m["mining.retrieval_depth"] = {"candidates retrieved per query when mining",
        number<std::size_t>([](Settings& s) -> auto& { return s.experiment.mining.retrieval_depth; })};
    m["mining.denoise_threshold"] = {"reranker score below which a candidate is a hard negative",
        number<double>([](Settings& s) -> auto& { return s.experiment.mining.denoise_threshold; })};
    m["mining.uf_top_k"] = {"unfollowing candidates per query and foreign corpus",
        number<std::size_t>([](Settings& s) -> auto& { return s.experiment.mining.uf_top_k; })};
    m["mining.uf_max_fraction"] = {"cap on unfollowing share of one instance's negatives",
        number<double>([](Settings& s) -> auto& { return s.experiment.mining.uf_max_fraction; })};
    m["mining.uf_pair_cap"] = {"cap on unfollowing samples per (task, foreign corpus)",
        number<std::size_t>([](Settings& s) -> auto& { return s.experiment.mining.uf_pair_cap; })};
    m["mining.use_hard_negatives"] = {"mine hard negatives",
        boolean([](Settings& s) -> auto& { return s.experiment.use_hard_negatives; })};
    m["mining.use_unfollowing"] = {"mine instruction-unfollowing negatives",
        boolean([](Settings& s) -> auto& { return s.experiment.use_unfollowing; })};
    m["mining.random_pool_size"] = {"random negatives stored per instance",
        number<std::size_t>([](Settings& s) -> auto& { return s.experiment.random_pool_size; })};
    m["mining.uf_pairs"] = {"task:corpus,corpus;task:corpus ... (unlisted tasks pair with all others)",
        [](Settings& s, std::string_view k, std::string_view v) {
          s.experiment.uf_pairs.clear();
          for (const auto& entry : split(v, ';')) {
            const auto colon = entry.find(':');
            if (colon == std::string::npos) bad_value(k, v);
            const auto task = std::string(trim(std::string_view(entry).substr(0, colon)));
            if (task.empty()) bad_value(k, v);
            s.experiment.uf_pairs[task] = split(std::string_view(entry).substr(colon + 1), ',');
          }
        }};
    m["bm25.k1"] = {"BM25 k1", number<double>([](Settings& s) -> auto& { return s.experiment.bm25.k1; })};
    m["bm25.b"] = {"BM25 b", number<double>([](Settings& s) -> auto& { return s.experiment.bm25.b; })};

    add_train_keys(m, "bootstrap", [](Settings& s) -> TrainConfig& { return s.experiment.bootstrap; });
    add_train_keys(m, "dual", [](Settings& s) -> TrainConfig& { return s.experiment.dual; });
    add_train_keys(m, "cross", [](Settings& s) -> TrainConfig& { return s.experiment.cross; });

    m["distill.threshold"] = {"cross score below which a positive becomes a hard negative",
        number<double>([](Settings& s) -> auto& { return s.experiment.distill.threshold; })};
    m["distill.promote_threshold"] = {"cross score above which a candidate becomes a positive",
        number<double>([](Settings& s) -> auto& { return s.experiment.distill.promote_threshold; })};

    m["eval.rerank_depth"] = {"first-stage candidates passed to the reranker",
        number<std::size_t>([](Settings& s) -> auto& { return s.experiment.rerank_depth; })};
    m["eval.k"] = {"metric cutoff", number<std::size_t>([](Settings& s) -> auto& { return s.experiment.k; })};
    m["eval.metric"] = {"ndcg | success | recall", [](Settings& s, std::string_view k, std::string_view v) {
                          const auto metric = parse_metric(v);
                          if (!metric) bad_value(k, v);
                          s.experiment.metric = *metric;
                        }};

    m["synth.n_tasks"] = {"generated tasks", number<std::size_t>([](Settings& s) -> auto& { return s.synth.n_tasks; })};
    m["synth.docs_per_task"] = {"documents per task", number<std::size_t>([](Settings& s) -> auto& { return s.synth.docs_per_task; })};
    m["synth.queries_per_task"] = {"queries per task", number<std::size_t>([](Settings& s) -> auto& { return s.synth.queries_per_task; })};
    m["synth.vocab_size"] = {"content vocabulary size", number<std::size_t>([](Settings& s) -> auto& { return s.synth.vocab_size; })};
    m["synth.overlap_fraction"] = {"share of queries used verbatim by every task",
        number<double>([](Settings& s) -> auto& { return s.synth.overlap_fraction; })};
    m["synth.query_length"] = {"content tokens per query", number<std::size_t>([](Settings& s) -> auto& { return s.synth.query_length; })};
    m["synth.instructions_per_task"] = {"instruction paraphrases per task",
        number<std::size_t>([](Settings& s) -> auto& { return s.synth.instructions_per_task; })};
    m["synth.filler_perturbation"] = {"query tokens replaced in each near-miss filler",
        number<std::size_t>([](Settings& s) -> auto& { return s.synth.filler_perturbation; })};
    m["synth.synonym_rate"] = {"per-token synonym swap probability in duplicate_question docs",
        number<double>([](Settings& s) -> auto& { return s.synth.synonym_rate; })};
    m["synth.intent_kinds"] = {"comma-separated: answer, duplicate_question, summary, code",
        [](Settings& s, std::string_view k, std::string_view v) {
          std::vector<IntentKind> kinds;
          for (const auto& name : split(v, ',')) kinds.push_back(parse_intent_kind(name));
          if (kinds.empty()) bad_value(k, v);
          s.synth.intent_kinds = std::move(kinds);
        }};
    return m;
  }();
  return table;
}

}  // namespace

SettingList parse_config(std::string_view text) {
  SettingList out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    auto line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos || trim(line.substr(0, eq)).empty()) {
        throw usage_error("bad_config_line", "line " + std::to_string(line_no));
      }
      out.emplace_back(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

void apply_setting(Settings& settings, std::string_view key, std::string_view value) {
  const auto& reg = registry();
  const auto it = reg.find(key);
  if (it == reg.end()) throw usage_error("unknown_setting", std::string(key));
  it->second.set(settings, key, value);
}

Settings resolve_settings(const std::filesystem::path* config_file, const SettingList& overrides) {
  Settings s;
  if (config_file != nullptr) {
    for (const auto& [k, v] : parse_config(read_file(*config_file))) apply_setting(s, k, v);
  }
  for (const auto& [k, v] : overrides) apply_setting(s, k, v);
  return s;
}

const std::vector<std::pair<std::string, std::string>>& setting_schema() {
  static const auto schema = [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [k, e] : registry()) out.emplace_back(k, e.description);
    return out;
  }();
  return schema;
}

}  // namespace tartan
