#include "tartan/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>

#include "tartan/error.hpp"
#include "tartan/rng.hpp"

namespace tartan {

namespace {

constexpr std::size_t kMaxRetries = 1000;
constexpr std::size_t kDetailTokens = 3;

struct KindFacets {
  IntentKind kind;
  const char* name;
  const char* intent_phrase;
  const char* unit;
  const char* marker_prefix;
};

constexpr std::array<KindFacets, 4> kKinds = {{
    {IntentKind::answer, "answer", "answers", "paragraph", "ka"},
    {IntentKind::duplicate_question, "duplicate_question", "asks the same thing as", "question",
     "kd"},
    {IntentKind::summary, "summary", "summarizes", "sentence", "ks"},
    {IntentKind::code, "code", "implements", "snippet", "kc"},
}};

constexpr std::array<const char*, 8> kDomains = {
    "encyclopedia", "medicine", "forums", "news", "science", "law", "finance", "travel"};

constexpr std::array<const char*, 4> kTemplates = {
    "retrieve a {unit} from {domain} that {intent} the query",
    "find the {domain} {unit} which {intent} this question",
    "search {domain} for a {unit} that {intent} the input",
    "given a query return the {unit} in {domain} that {intent} it",
};

const KindFacets& facets(IntentKind kind) {
  for (const auto& f : kKinds) {
    if (f.kind == kind) return f;
  }
  throw usage_error("unknown_intent_kind");
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

std::string domain_name(std::size_t task_index) {
  std::string d = kDomains[task_index % kDomains.size()];
  if (task_index >= kDomains.size()) d += std::to_string(task_index / kDomains.size() + 1);
  return d;
}

std::string padded(char prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%04zu", prefix, i);
  return buf;
}

using Tokens = std::vector<std::size_t>;

std::string word(std::size_t i) { return "w" + std::to_string(i); }

// Fixed pairing w(2i) <-> w(2i+1); an unpaired last word is its own synonym.
std::size_t synonym(std::size_t i, std::size_t vocab) {
  const std::size_t s = i ^ 1U;
  return s < vocab ? s : i;
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += ' ';
    out += p;
  }
  return out;
}

std::string query_text(const Tokens& q) {
  std::vector<std::string> parts;
  for (auto t : q) parts.push_back(word(t));
  return join(parts);
}

class Generator {
 public:
  explicit Generator(const SynthSpec& spec) : spec_(spec) {}

  Tokens draw_query(Rng& rng) const {
    Tokens q;
    for (auto i : rng.sample_indices(spec_.vocab_size, spec_.query_length)) q.push_back(i);
    return q;
  }

  Tokens perturb(const Tokens& q, Rng& rng) const {
    Tokens out = q;
    const std::set<std::size_t> used(q.begin(), q.end());
    for (auto pos : rng.sample_indices(q.size(), std::min(spec_.filler_perturbation, q.size()))) {
      std::size_t t = rng.below(spec_.vocab_size);
      while (used.count(t) != 0) t = rng.below(spec_.vocab_size);
      out[pos] = t;
    }
    return out;
  }

  std::string render(IntentKind kind, std::size_t task_index, const Tokens& q, Rng& rng) const {
    const std::string m = facets(kind).marker_prefix;
    const std::string dom = "dm" + std::to_string(task_index);
    std::vector<std::string> parts;
    switch (kind) {
      case IntentKind::answer: {
        parts = {m + "0", dom};
        for (auto t : q) parts.push_back(word(t));
        for (std::size_t i = 0; i < kDetailTokens; ++i) parts.push_back(word(rng.below(spec_.vocab_size)));
        parts.push_back(m + "1");
        break;
      }
      case IntentKind::duplicate_question: {
        Tokens p = q;
        for (auto& t : p) {
          if (rng.uniform() < spec_.synonym_rate) t = synonym(t, spec_.vocab_size);
        }
        rng.shuffle(p);
        parts = {m + "0", dom};
        for (auto t : p) parts.push_back(word(t));
        parts.push_back(m + "1");
        break;
      }
      case IntentKind::summary: {
        parts = {m + "0", dom};
        const std::size_t n = std::max<std::size_t>(1, q.size() / 2);
        for (std::size_t i = 0; i < n; ++i) parts.push_back(word(q[i]));
        parts.push_back(m + "1");
        break;
      }
      case IntentKind::code: {
        parts = {dom, m + "0"};
        const std::size_t n = std::max<std::size_t>(1, (2 * q.size()) / 3);
        for (std::size_t i = 0; i < n; ++i) parts.push_back(word(q[i]));
        parts.push_back(m + "1");
        break;
      }
    }
    return join(parts);
  }

 private:
  const SynthSpec& spec_;
};

}  // namespace

std::string_view to_string(IntentKind kind) { return facets(kind).name; }

IntentKind parse_intent_kind(std::string_view name) {
  for (const auto& f : kKinds) {
    if (name == f.name) return f.kind;
  }
  throw usage_error("unknown_intent_kind", std::string(name));
}

void SynthSpec::validate() const {
  if (n_tasks < 1 || docs_per_task < 1 || queries_per_task < 1 || vocab_size < 1 ||
      query_length < 1 || instructions_per_task < 1 || filler_perturbation < 1) {
    throw usage_error("bad_spec", "counts must be >= 1");
  }
  if (intent_kinds.empty()) throw usage_error("bad_spec", "intent_kinds is empty");
  if (!(overlap_fraction >= 0.0 && overlap_fraction <= 1.0)) {
    throw usage_error("bad_spec", "overlap_fraction must be in [0, 1]");
  }
  if (!(synonym_rate >= 0.0 && synonym_rate <= 1.0)) {
    throw usage_error("bad_spec", "synonym_rate must be in [0, 1]");
  }
  if (instructions_per_task > kTemplates.size()) {
    throw usage_error("bad_spec", "at most " + std::to_string(kTemplates.size()) +
                                      " instructions per task");
  }
  if (docs_per_task < queries_per_task) {
    throw usage_error("bad_spec", "docs_per_task must be >= queries_per_task");
  }
}

std::vector<Task> generate_benchmark(const SynthSpec& spec) {
  spec.validate();
  if (spec.vocab_size < spec.query_length + spec.filler_perturbation) {
    throw data_error("vocab_exhausted", "vocabulary smaller than query length + perturbation");
  }
  const Generator gen(spec);
  const std::size_t n_shared = static_cast<std::size_t>(
      std::llround(spec.overlap_fraction * static_cast<double>(spec.queries_per_task)));

  std::set<std::string> used_queries;
  auto fresh_query = [&](Rng& rng) {
    for (std::size_t attempt = 0; attempt < kMaxRetries; ++attempt) {
      Tokens q = gen.draw_query(rng);
      if (used_queries.insert(query_text(q)).second) return q;
    }
    throw data_error("vocab_exhausted", "cannot draw distinct queries");
  };

  Rng shared_rng(derive_seed(spec.seed, "synth.shared"));
  std::vector<Tokens> shared;
  for (std::size_t i = 0; i < n_shared; ++i) shared.push_back(fresh_query(shared_rng));

  std::vector<std::vector<Tokens>> task_queries(spec.n_tasks);
  for (std::size_t t = 0; t < spec.n_tasks; ++t) {
    Rng rng(derive_seed(derive_seed(spec.seed, "synth.queries"), t));
    task_queries[t] = shared;
    while (task_queries[t].size() < spec.queries_per_task) task_queries[t].push_back(fresh_query(rng));
  }

  std::vector<Task> tasks;
  for (std::size_t t = 0; t < spec.n_tasks; ++t) {
    const IntentKind kind = spec.intent_kinds[t % spec.intent_kinds.size()];
    const KindFacets& f = facets(kind);
    const std::string domain = domain_name(t);
    Rng rng(derive_seed(derive_seed(spec.seed, "synth.docs"), t));

    Task task;
    task.id = "t" + std::to_string(t) + "_" + f.name;
    for (std::size_t j = 0; j < spec.instructions_per_task; ++j) {
      Instruction ins;
      ins.text = replace_all(replace_all(replace_all(kTemplates[j], "{unit}", f.unit), "{domain}", domain),
                             "{intent}", f.intent_phrase);
      ins.intent = f.name;
      ins.domain = domain;
      ins.unit = f.unit;
      ins.paraphrase_group = task.id;
      task.instructions.push_back(std::move(ins));
    }

    std::set<std::string> texts;
    auto unique_render = [&](const Tokens& base, bool perturb) {
      for (std::size_t attempt = 0; attempt < kMaxRetries; ++attempt) {
        const Tokens q = perturb ? gen.perturb(base, rng) : base;
        std::string text = gen.render(kind, t, q, rng);
        if (texts.insert(text).second) return text;
        perturb = true;
      }
      throw data_error("vocab_exhausted", "cannot render distinct documents");
    };

    const auto& queries = task_queries[t];
    // (text, gold query index or npos)
    std::vector<std::pair<std::string, std::size_t>> docs;
    for (std::size_t i = 0; i < queries.size(); ++i) docs.emplace_back(unique_render(queries[i], false), i);
    for (std::size_t i = queries.size(); i < spec.docs_per_task; ++i) {
      docs.emplace_back(unique_render(queries[rng.below(queries.size())], true), std::string::npos);
    }
    rng.shuffle(docs);

    std::vector<Document> corpus_docs;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const std::string id = padded('d', i);
      corpus_docs.push_back(Document{id, std::nullopt, docs[i].first, task.id});
      if (docs[i].second != std::string::npos) task.qrels.set(padded('q', docs[i].second), id, 1);
    }
    task.corpus = Corpus(task.id, std::move(corpus_docs));
    for (std::size_t i = 0; i < queries.size(); ++i) {
      task.queries.push_back(Query{padded('q', i), query_text(queries[i]), task.id});
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

}  // namespace tartan
