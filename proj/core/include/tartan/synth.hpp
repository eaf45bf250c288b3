#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tartan/schema.hpp"

namespace tartan {

enum class IntentKind { answer, duplicate_question, summary, code };

std::string_view to_string(IntentKind kind);
IntentKind parse_intent_kind(std::string_view name);

struct SynthSpec {
  std::size_t n_tasks = 3;
  std::size_t docs_per_task = 1000;
  std::size_t queries_per_task = 200;
  std::size_t vocab_size = 2000;
  std::vector<IntentKind> intent_kinds = {IntentKind::answer, IntentKind::duplicate_question,
                                          IntentKind::summary};
  double overlap_fraction = 0.8;  // share of each task's queries used verbatim by every task
  std::uint64_t seed = 0;
  std::size_t query_length = 6;
  std::size_t instructions_per_task = 3;
  std::size_t filler_perturbation = 1;  // query tokens replaced in each near-miss filler
  double synonym_rate = 0.1;            // per-token swap probability in duplicate_question docs

  void validate() const;
};

// Deterministic multi-task benchmark over a synthetic token vocabulary.
//
// Task i has intent kind intent_kinds[i % size] and its own domain. Every
// gold document is a rendering of its query that depends on the intent
// kind, tagged with marker tokens for the kind and the domain:
//   answer              all query tokens + fresh detail tokens
//   duplicate_question  query tokens, each swapped for its synonym w.p. synonym_rate, reordered
//   summary             the first half of the query tokens
//   code                the first two thirds of the query tokens inside code markers
// Remaining corpus slots hold renderings of the task's own queries with
// filler_perturbation tokens replaced, so every corpus contains lexical
// near-misses. Marker tokens never appear in instructions; the
// instruction-to-marker association has to be learned. Overlapped queries
// appear verbatim in every task.
//
// Throws "vocab_exhausted" when the vocabulary cannot supply distinct
// queries or documents.
std::vector<Task> generate_benchmark(const SynthSpec& spec);

}  // namespace tartan
