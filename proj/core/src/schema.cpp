#include "tartan/schema.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "tartan/error.hpp"

namespace tartan {

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

Corpus::Corpus(std::string id, std::vector<Document> docs) : id_(std::move(id)) {
  docs_.reserve(docs.size());
  for (auto& d : docs) {
    if (!add(std::move(d))) {
      throw data_error("duplicate_doc_id", "corpus " + id_);
    }
  }
}

bool Corpus::add(Document doc) {
  if (index_.contains(doc.id)) return false;
  index_.emplace(doc.id, docs_.size());
  docs_.push_back(std::move(doc));
  return true;
}

const Document* Corpus::find(std::string_view doc_id) const {
  const auto it = index_.find(std::string(doc_id));
  return it == index_.end() ? nullptr : &docs_[it->second];
}

int Qrels::grade(std::string_view query_id, std::string_view doc_id) const {
  const auto* g = judged(query_id);
  if (g == nullptr) return 0;
  const auto it = g->find(std::string(doc_id));
  return it == g->end() ? 0 : it->second;
}

const Qrels::Grades* Qrels::judged(std::string_view query_id) const {
  const auto it = entries_.find(query_id);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> Qrels::positives(std::string_view query_id) const {
  std::vector<std::string> out;
  if (const auto* g = judged(query_id)) {
    for (const auto& [doc, grade] : *g) {
      if (grade > 0) out.push_back(doc);
    }
  }
  return out;
}

std::size_t Qrels::size() const {
  std::size_t n = 0;
  for (const auto& [q, g] : entries_) n += g.size();
  return n;
}

const Query* Task::find_query(std::string_view query_id) const {
  for (const auto& q : queries) {
    if (q.id == query_id) return &q;
  }
  return nullptr;
}

std::string compose_input(const InstructionSlot& instruction, std::string_view query_text) {
  if (const auto* inst = std::get_if<Instruction>(&instruction)) {
    std::string out;
    out.reserve(inst->text.size() + 1 + query_text.size());
    out += inst->text;
    out += ' ';
    out += query_text;
    return out;
  }
  return std::string(query_text);
}

std::string compose_input(const InstructionSlot& instruction, const Query& query) {
  return compose_input(instruction, query.text);
}

std::string_view to_string(UnificationRule rule) {
  switch (rule) {
    case UnificationRule::qa_context_as_gold: return "qa_context_as_gold";
    case UnificationRule::summarization_target_as_gold: return "summarization_target_as_gold";
    case UnificationRule::simplification_target_as_gold: return "simplification_target_as_gold";
    case UnificationRule::code_comment_as_query: return "code_comment_as_query";
    case UnificationRule::question_duplicate_as_gold: return "question_duplicate_as_gold";
  }
  return "unknown";
}

std::optional<UnificationRule> parse_unification_rule(std::string_view name) {
  for (auto r : {UnificationRule::qa_context_as_gold, UnificationRule::summarization_target_as_gold,
                 UnificationRule::simplification_target_as_gold,
                 UnificationRule::code_comment_as_query,
                 UnificationRule::question_duplicate_as_gold}) {
    if (to_string(r) == name) return r;
  }
  return std::nullopt;
}

Instruction default_instruction(UnificationRule rule) {
  switch (rule) {
    case UnificationRule::qa_context_as_gold:
      return {"Retrieve a paragraph that answers this question.", "answer", "open", "paragraph",
              "qa"};
    case UnificationRule::summarization_target_as_gold:
      return {"Retrieve a short summary of this text.", "summary", "news", "sentence", "summary"};
    case UnificationRule::simplification_target_as_gold:
      return {"Retrieve a simplified version of this text.", "simplification", "open", "sentence",
              "simplification"};
    case UnificationRule::code_comment_as_query:
      return {"Retrieve a code snippet that implements this description.", "code", "programming",
              "snippet", "code"};
    case UnificationRule::question_duplicate_as_gold:
      return {"Retrieve a question that is a duplicate of this question.", "duplicate_question",
              "forum", "question", "duplicate"};
  }
  throw usage_error("unknown_rule");
}

Task unify_dataset(const std::vector<std::pair<std::string, std::string>>& pairs,
                   UnificationRule rule, std::string task_id) {
  if (pairs.empty()) throw data_error("empty_pairs");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (blank(pairs[i].first) || blank(pairs[i].second)) {
      throw data_error("empty_pair_side", "pair index " + std::to_string(i));
    }
  }

  Task task;
  task.id = std::move(task_id);
  task.corpus = Corpus(task.id);
  task.instructions.push_back(default_instruction(rule));
  task.instructions.back().paraphrase_group = task.id;

  std::unordered_map<std::string, std::string> doc_by_text;
  std::unordered_map<std::string, std::string> query_by_text;
  for (const auto& [source, target] : pairs) {
    auto dit = doc_by_text.find(target);
    if (dit == doc_by_text.end()) {
      const std::string id = "d" + std::to_string(task.corpus.size());
      task.corpus.add(Document{id, std::nullopt, target, task.id});
      dit = doc_by_text.emplace(target, id).first;
    }
    auto qit = query_by_text.find(source);
    if (qit == query_by_text.end()) {
      const std::string id = "q" + std::to_string(task.queries.size());
      task.queries.push_back(Query{id, source, task.id});
      qit = query_by_text.emplace(source, id).first;
    }
    task.qrels.set(qit->second, dit->second, 1);
  }
  return task;
}

bool ValidationReport::has(std::string_view code) const {
  return std::any_of(issues.begin(), issues.end(),
                     [&](const ValidationIssue& i) { return i.code == code; });
}

ValidationReport validate_task(const Task& task) {
  ValidationReport report;
  auto add = [&](std::string code, std::string detail) {
    report.issues.push_back({std::move(code), std::move(detail)});
  };

  if (blank(task.id)) add("empty_task_id", "");
  if (task.instructions.empty()) add("missing_instruction", task.id);
  for (std::size_t i = 0; i < task.instructions.size(); ++i) {
    const auto& inst = task.instructions[i];
    if (blank(inst.text)) add("empty_instruction_text", std::to_string(i));
    if (inst.intent.empty() || inst.domain.empty() || inst.unit.empty()) {
      add("missing_facet", std::to_string(i));
    }
  }

  for (const auto& d : task.corpus.docs()) {
    if (blank(d.text)) add("empty_document_text", d.id);
    if (d.corpus_id != task.corpus_id()) add("foreign_document", d.id);
  }

  std::set<std::string, std::less<>> query_ids;
  for (const auto& q : task.queries) {
    if (!query_ids.insert(q.id).second) add("duplicate_query_id", q.id);
    if (blank(q.text)) add("empty_query_text", q.id);
  }

  for (const auto& [qid, grades] : task.qrels.entries()) {
    if (!query_ids.contains(qid)) add("dangling_qrel", "query " + qid);
    for (const auto& [did, grade] : grades) {
      if (!task.corpus.contains(did)) add("dangling_qrel", "doc " + did);
      if (grade < 0) add("negative_grade", qid + "/" + did);
    }
  }

  for (const auto& q : task.queries) {
    if (task.qrels.positives(q.id).empty()) add("query_without_positive", q.id);
  }
  return report;
}

ValidationReport validate_instance(const TrainingInstance& instance, const Task& task) {
  ValidationReport report;
  auto add = [&](std::string code, std::string detail) {
    report.issues.push_back({std::move(code), std::move(detail)});
  };
  const std::set<std::string> pos(instance.positives.begin(), instance.positives.end());
  for (const auto& d : instance.hard_negatives) {
    if (pos.contains(d)) add("positive_in_negatives", d);
  }
  for (const auto& d : instance.random_negatives) {
    if (pos.contains(d)) add("positive_in_negatives", d);
  }
  for (const auto& k : instance.unfollowing_negatives) {
    if (k.corpus_id == task.corpus_id()) add("unfollowing_same_corpus", k.doc_id);
  }
  for (const auto& d : instance.positives) {
    if (!task.corpus.contains(d)) add("unknown_document", d);
  }
  return report;
}

}  // namespace tartan
