#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

namespace tartan {

// Natural-language task description with its three facets.
struct Instruction {
  std::string text;
  std::string intent;
  std::string domain;
  std::string unit;
  std::string paraphrase_group;

  bool operator==(const Instruction&) const = default;
};

// Explicit "no instruction" marker for ablations. Kept distinct from an
// empty-text Instruction so logs and reports can tell the two apart.
struct NoInstruction {
  bool operator==(const NoInstruction&) const = default;
};

using InstructionSlot = std::variant<NoInstruction, Instruction>;

inline bool has_instruction(const InstructionSlot& slot) {
  return std::holds_alternative<Instruction>(slot);
}

struct Document {
  std::string id;
  std::optional<std::string> title;
  std::string text;
  std::string corpus_id;

  bool operator==(const Document&) const = default;
};

struct Query {
  std::string id;
  std::string text;
  std::string task_id;

  bool operator==(const Query&) const = default;
};

// Fully-qualified document reference, used where documents may come from a
// corpus other than the task's own (instruction-unfollowing negatives).
struct DocKey {
  std::string corpus_id;
  std::string doc_id;

  auto operator<=>(const DocKey&) const = default;
};

// Ordered document collection with id lookup. Order is file order and is
// preserved everywhere (index rows, tie-free iteration).
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::string id) : id_(std::move(id)) {}
  Corpus(std::string id, std::vector<Document> docs);

  const std::string& id() const { return id_; }
  const std::vector<Document>& docs() const { return docs_; }
  std::size_t size() const { return docs_.size(); }
  bool empty() const { return docs_.empty(); }

  // Appends; returns false (and leaves the corpus unchanged) on a duplicate id.
  bool add(Document doc);

  const Document* find(std::string_view doc_id) const;
  bool contains(std::string_view doc_id) const { return find(doc_id) != nullptr; }

  bool operator==(const Corpus& other) const {
    return id_ == other.id_ && docs_ == other.docs_;
  }

 private:
  std::string id_;
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> index_;
};

// query_id -> doc_id -> non-negative relevance grade.
class Qrels {
 public:
  using Grades = std::map<std::string, int>;

  void set(const std::string& query_id, const std::string& doc_id, int grade) {
    entries_[query_id][doc_id] = grade;
  }
  int grade(std::string_view query_id, std::string_view doc_id) const;
  // Judged docs for a query; nullptr when the query has no judgments.
  const Grades* judged(std::string_view query_id) const;
  std::vector<std::string> positives(std::string_view query_id) const;
  bool contains_query(std::string_view query_id) const { return judged(query_id) != nullptr; }

  const std::map<std::string, Grades, std::less<>>& entries() const { return entries_; }
  std::size_t size() const;

  bool operator==(const Qrels&) const = default;

 private:
  std::map<std::string, Grades, std::less<>> entries_;
};

struct Task {
  std::string id;
  Corpus corpus;
  std::vector<Query> queries;
  Qrels qrels;
  std::vector<Instruction> instructions;

  const std::string& corpus_id() const { return corpus.id(); }
  const Query* find_query(std::string_view query_id) const;

  bool operator==(const Task&) const = default;
};

// A query with its gold documents and the three typed negative pools.
// positives, hard_negatives and random_negatives live in the task's own
// corpus; unfollowing negatives name their foreign corpus explicitly.
struct TrainingInstance {
  std::string task_id;
  std::string query_id;
  std::vector<std::string> positives;
  std::vector<std::string> hard_negatives;
  std::vector<DocKey> unfollowing_negatives;
  std::vector<std::string> random_negatives;

  bool operator==(const TrainingInstance&) const = default;
};

// Joins instruction and query text with a single space. The NoInstruction
// sentinel yields the query text unchanged.
std::string compose_input(const InstructionSlot& instruction, std::string_view query_text);
std::string compose_input(const InstructionSlot& instruction, const Query& query);

enum class UnificationRule {
  qa_context_as_gold,
  summarization_target_as_gold,
  simplification_target_as_gold,
  code_comment_as_query,
  question_duplicate_as_gold,
};

std::string_view to_string(UnificationRule rule);
std::optional<UnificationRule> parse_unification_rule(std::string_view name);

// Instruction attached to every task produced by a given rule.
Instruction default_instruction(UnificationRule rule);

// Turns (source, target) pairs into a retrieval task: sources become queries,
// targets become the corpus (deduplicated by exact text), and each query is
// judged relevant (grade 1) to its own partner. Throws "empty_pairs" or
// "empty_pair_side" (with the offending index).
Task unify_dataset(const std::vector<std::pair<std::string, std::string>>& pairs,
                   UnificationRule rule, std::string task_id = "task");

struct ValidationIssue {
  std::string code;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const { return issues.empty(); }
  bool has(std::string_view code) const;
};

ValidationReport validate_task(const Task& task);

// Instance-level contract: positives disjoint from every negative pool and
// every unfollowing negative taken from a foreign corpus.
ValidationReport validate_instance(const TrainingInstance& instance, const Task& task);

}  // namespace tartan
