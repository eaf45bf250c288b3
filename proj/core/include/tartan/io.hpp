#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tartan/schema.hpp"

namespace tartan {

// Corpus: JSON-lines {"_id", "title"?, "text"}.
Corpus read_corpus(std::istream& in, const std::string& corpus_id);
void write_corpus(std::ostream& out, const Corpus& corpus);

// Queries: JSON-lines {"_id", "text"}.
std::vector<Query> read_queries(std::istream& in, const std::string& task_id);
void write_queries(std::ostream& out, const std::vector<Query>& queries);

// Qrels: TSV with three (query, doc, grade) or four (query, 0, doc, grade)
// columns. A first line whose last column is not an integer is a header.
Qrels read_qrels(std::istream& in);
void write_qrels(std::ostream& out, const Qrels& qrels);

// Instructions: JSON-lines {"task_id", "text", "intent", "domain", "unit"}
// plus an optional "paraphrase_group". Returned grouped by task id.
std::map<std::string, std::vector<Instruction>> read_instructions(std::istream& in);
void write_instructions(std::ostream& out, const std::string& task_id,
                        const std::vector<Instruction>& instructions);

// One task per directory: corpus.jsonl, queries.jsonl, qrels.tsv,
// instructions.jsonl. The directory name is the task id and the corpus id.
void save_task(const std::filesystem::path& dir, const Task& task);
Task load_task(const std::filesystem::path& dir);

// A benchmark directory holds one sub-directory per task, loaded in
// lexicographic order.
void save_benchmark(const std::filesystem::path& dir, const std::vector<Task>& tasks);
std::vector<Task> load_benchmark(const std::filesystem::path& dir);

// Mined pools: JSON-lines {"task_id", "query_id", "pool", "doc_ids", "source_corpus"}
// with pool in {"positive", "hard", "unfollowing", "random"}. Unfollowing
// pools are written one line per source corpus.
void write_instances(std::ostream& out, const std::vector<TrainingInstance>& instances,
                     const std::map<std::string, std::string>& corpus_of_task);
std::vector<TrainingInstance> read_instances(std::istream& in);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace tartan
