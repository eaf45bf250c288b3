#include "tartan/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "nlohmann/json.hpp"
#include "tartan/error.hpp"

namespace tartan {

using ordered_json = nlohmann::ordered_json;

namespace {

std::vector<std::string> split_tabs_or_spaces(const std::string& line) {
  std::vector<std::string> cols;
  std::string cur;
  bool saw_tab = line.find('\t') != std::string::npos;
  const char sep = saw_tab ? '\t' : ' ';
  for (char c : line) {
    if (c == sep) {
      if (!cur.empty() || saw_tab) cols.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (!cur.empty() || saw_tab) cols.push_back(cur);
  return cols;
}

bool parse_int(const std::string& s, int& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e;
}

ordered_json parse_line(const std::string& line, std::size_t lineno, const char* what) {
  try {
    return ordered_json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("bad_jsonl", std::string(what) + " line " + std::to_string(lineno) + ": " +
                                      e.what());
  }
}

std::string required_string(const ordered_json& j, const char* key, std::size_t lineno) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw data_error("missing_field", std::string(key) + " at line " + std::to_string(lineno));
  }
  return it->get<std::string>();
}

template <typename Fn>
void for_each_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(line, lineno);
  }
}

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw data_error("file_not_found", p.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw data_error("file_not_writable", p.string());
  return out;
}

}  // namespace

Corpus read_corpus(std::istream& in, const std::string& corpus_id) {
  Corpus corpus(corpus_id);
  for_each_line(in, [&](const std::string& line, std::size_t lineno) {
    const auto j = parse_line(line, lineno, "corpus");
    Document d;
    d.id = required_string(j, "_id", lineno);
    d.text = required_string(j, "text", lineno);
    if (const auto it = j.find("title"); it != j.end() && it->is_string()) {
      d.title = it->get<std::string>();
    }
    d.corpus_id = corpus_id;
    if (!corpus.add(std::move(d))) {
      throw data_error("duplicate_doc_id", "line " + std::to_string(lineno));
    }
  });
  return corpus;
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& d : corpus.docs()) {
    ordered_json j;
    j["_id"] = d.id;
    if (d.title) j["title"] = *d.title;
    j["text"] = d.text;
    out << j.dump() << '\n';
  }
}

std::vector<Query> read_queries(std::istream& in, const std::string& task_id) {
  std::vector<Query> queries;
  for_each_line(in, [&](const std::string& line, std::size_t lineno) {
    const auto j = parse_line(line, lineno, "queries");
    queries.push_back(Query{required_string(j, "_id", lineno), required_string(j, "text", lineno),
                            task_id});
  });
  return queries;
}

void write_queries(std::ostream& out, const std::vector<Query>& queries) {
  for (const auto& q : queries) {
    ordered_json j;
    j["_id"] = q.id;
    j["text"] = q.text;
    out << j.dump() << '\n';
  }
}

Qrels read_qrels(std::istream& in) {
  Qrels qrels;
  bool first = true;
  for_each_line(in, [&](const std::string& line, std::size_t lineno) {
    const auto cols = split_tabs_or_spaces(line);
    int grade = 0;
    const bool numeric_tail = !cols.empty() && parse_int(cols.back(), grade);
    if (first && !numeric_tail) {
      first = false;
      return;
    }
    first = false;
    if (!numeric_tail) throw data_error("bad_qrels", "line " + std::to_string(lineno));
    if (cols.size() == 3) {
      qrels.set(cols[0], cols[1], grade);
    } else if (cols.size() == 4) {
      qrels.set(cols[0], cols[2], grade);
    } else {
      throw data_error("bad_qrels", "expected 3 or 4 columns at line " + std::to_string(lineno));
    }
  });
  return qrels;
}

void write_qrels(std::ostream& out, const Qrels& qrels) {
  out << "query-id\tcorpus-id\tscore\n";
  for (const auto& [qid, grades] : qrels.entries()) {
    for (const auto& [did, grade] : grades) {
      out << qid << '\t' << did << '\t' << grade << '\n';
    }
  }
}

std::map<std::string, std::vector<Instruction>> read_instructions(std::istream& in) {
  std::map<std::string, std::vector<Instruction>> out;
  for_each_line(in, [&](const std::string& line, std::size_t lineno) {
    const auto j = parse_line(line, lineno, "instructions");
    Instruction inst;
    const auto task_id = required_string(j, "task_id", lineno);
    inst.text = required_string(j, "text", lineno);
    inst.intent = required_string(j, "intent", lineno);
    inst.domain = required_string(j, "domain", lineno);
    inst.unit = required_string(j, "unit", lineno);
    if (const auto it = j.find("paraphrase_group"); it != j.end() && it->is_string()) {
      inst.paraphrase_group = it->get<std::string>();
    } else {
      inst.paraphrase_group = task_id;
    }
    out[task_id].push_back(std::move(inst));
  });
  return out;
}

void write_instructions(std::ostream& out, const std::string& task_id,
                        const std::vector<Instruction>& instructions) {
  for (const auto& inst : instructions) {
    ordered_json j;
    j["task_id"] = task_id;
    j["text"] = inst.text;
    j["intent"] = inst.intent;
    j["domain"] = inst.domain;
    j["unit"] = inst.unit;
    j["paraphrase_group"] = inst.paraphrase_group;
    out << j.dump() << '\n';
  }
}

void save_task(const std::filesystem::path& dir, const Task& task) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "corpus.jsonl");
    write_corpus(out, task.corpus);
  }
  {
    auto out = open_out(dir / "queries.jsonl");
    write_queries(out, task.queries);
  }
  {
    auto out = open_out(dir / "qrels.tsv");
    write_qrels(out, task.qrels);
  }
  {
    auto out = open_out(dir / "instructions.jsonl");
    write_instructions(out, task.id, task.instructions);
  }
}

Task load_task(const std::filesystem::path& dir) {
  Task task;
  task.id = dir.filename().string();
  if (task.id.empty()) task.id = dir.parent_path().filename().string();
  {
    auto in = open_in(dir / "corpus.jsonl");
    task.corpus = read_corpus(in, task.id);
  }
  {
    auto in = open_in(dir / "queries.jsonl");
    task.queries = read_queries(in, task.id);
  }
  {
    auto in = open_in(dir / "qrels.tsv");
    task.qrels = read_qrels(in);
  }
  if (std::filesystem::exists(dir / "instructions.jsonl")) {
    auto in = open_in(dir / "instructions.jsonl");
    auto grouped = read_instructions(in);
    if (auto it = grouped.find(task.id); it != grouped.end()) {
      task.instructions = std::move(it->second);
    }
  }
  return task;
}

void save_benchmark(const std::filesystem::path& dir, const std::vector<Task>& tasks) {
  std::filesystem::create_directories(dir);
  for (const auto& t : tasks) save_task(dir / t.id, t);
}

std::vector<Task> load_benchmark(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw data_error("file_not_found", dir.string());
  std::vector<std::filesystem::path> subdirs;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "corpus.jsonl")) {
      subdirs.push_back(entry.path());
    }
  }
  std::sort(subdirs.begin(), subdirs.end());
  std::vector<Task> tasks;
  for (const auto& p : subdirs) tasks.push_back(load_task(p));
  return tasks;
}

void write_instances(std::ostream& out, const std::vector<TrainingInstance>& instances,
                     const std::map<std::string, std::string>& corpus_of_task) {
  for (const auto& inst : instances) {
    const auto cit = corpus_of_task.find(inst.task_id);
    const std::string own = cit == corpus_of_task.end() ? inst.task_id : cit->second;
    auto emit = [&](const char* pool, const std::vector<std::string>& ids,
                    const std::string& source) {
      ordered_json j;
      j["task_id"] = inst.task_id;
      j["query_id"] = inst.query_id;
      j["pool"] = pool;
      j["doc_ids"] = ids;
      j["source_corpus"] = source;
      out << j.dump() << '\n';
    };
    emit("positive", inst.positives, own);
    emit("hard", inst.hard_negatives, own);
    // Group unfollowing negatives by source corpus, preserving first-seen order.
    std::vector<std::pair<std::string, std::vector<std::string>>> groups;
    for (const auto& k : inst.unfollowing_negatives) {
      auto it = std::find_if(groups.begin(), groups.end(),
                             [&](const auto& g) { return g.first == k.corpus_id; });
      if (it == groups.end()) {
        groups.push_back({k.corpus_id, {}});
        it = std::prev(groups.end());
      }
      it->second.push_back(k.doc_id);
    }
    for (const auto& [corpus, ids] : groups) emit("unfollowing", ids, corpus);
    emit("random", inst.random_negatives, own);
  }
}

std::vector<TrainingInstance> read_instances(std::istream& in) {
  std::vector<TrainingInstance> out;
  std::map<std::pair<std::string, std::string>, std::size_t> slot;
  for_each_line(in, [&](const std::string& line, std::size_t lineno) {
    const auto j = parse_line(line, lineno, "pools");
    const auto task_id = required_string(j, "task_id", lineno);
    const auto query_id = required_string(j, "query_id", lineno);
    const auto pool = required_string(j, "pool", lineno);
    const auto source = required_string(j, "source_corpus", lineno);
    const auto ids_it = j.find("doc_ids");
    if (ids_it == j.end() || !ids_it->is_array()) {
      throw data_error("missing_field", "doc_ids at line " + std::to_string(lineno));
    }
    const auto ids = ids_it->get<std::vector<std::string>>();
    auto [it, inserted] = slot.try_emplace({task_id, query_id}, out.size());
    if (inserted) out.push_back(TrainingInstance{task_id, query_id, {}, {}, {}, {}});
    auto& inst = out[it->second];
    if (pool == "positive") {
      inst.positives.insert(inst.positives.end(), ids.begin(), ids.end());
    } else if (pool == "hard") {
      inst.hard_negatives.insert(inst.hard_negatives.end(), ids.begin(), ids.end());
    } else if (pool == "random") {
      inst.random_negatives.insert(inst.random_negatives.end(), ids.begin(), ids.end());
    } else if (pool == "unfollowing") {
      for (const auto& id : ids) inst.unfollowing_negatives.push_back(DocKey{source, id});
    } else {
      throw data_error("bad_pool", pool + " at line " + std::to_string(lineno));
    }
  });
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  auto out = open_out(path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw data_error("file_not_writable", path.string());
}

}  // namespace tartan
