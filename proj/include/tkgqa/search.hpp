#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tkgqa/index.hpp"
#include "tkgqa/store.hpp"
#include "tkgqa/time_interval.hpp"

namespace tkgqa {

enum class EntityRole { Head, Tail, Any };
enum class SortMode { Relevance, Time };

struct EntityConstraint {
  std::string name;
  EntityRole role = EntityRole::Any;
};

// The conjunctive filter C = {c_time, c_entity, c_rel} plus ranking knobs.
// Absent constraints mean "no restriction" on that axis.
struct SearchConstraints {
  std::optional<TimeInterval> time_window;
  std::vector<EntityConstraint> entities;   // OR within the list
  std::vector<std::string> relations;       // OR within the list
  SortMode sort_mode = SortMode::Relevance;
  int limit = 10;
  int rerank_pool = 50;       // top-m pool re-sorted chronologically in time mode
  bool time_descending = false;

  // Restores the limit <= rerank_pool invariant after user input.
  void normalize() {
    if (rerank_pool < limit) rerank_pool = limit;
  }
};

struct SearchEntry {
  FactId fact_id = 0;
  double score = 0.0;
  std::string text;        // verbalized fact
  std::string timestamp;   // as ingested
};

struct SearchResult {
  std::vector<SearchEntry> entries;
  std::size_t candidate_count = 0;  // |G_sub| before ranking
};

// Exactly the facts satisfying ALL present constraints:
//   - fact interval overlaps time_window (inclusive overlap),
//   - at least one entity constraint matches in its stated role,
//   - fact relation is one of the listed relations.
// Names that fail dictionary lookup match nothing. Result ids ascend.
std::vector<FactId> filter_candidates(const TkgStore& store,
                                      const SearchConstraints& c);

// Filter, embed the query, score candidates, rank.
//   relevance mode: top-limit by score.
//   time mode:      top-rerank_pool by score, re-sorted by interval start
//                   (ties by fact_id), first limit returned.
// Score ties break by ascending fact_id.
SearchResult search(const std::string& query, const SearchConstraints& c,
                    const TkgStore& store, const FactIndex& index,
                    Embedder& embedder);

// Observation text fed back to the agent:
//   "i. {verbalized fact} [{timestamp}] (score={score, 3 decimals})" lines
// plus a trailing "candidates={candidate_count}" line.
std::string render_observation(const SearchResult& result);

// The tool-call object the agent emits inside <search>...</search>:
// { query, time_start?, time_end?, entities?, relations?, sort?, limit? }.
struct ToolCall {
  std::string query;
  SearchConstraints constraints;
};

// Parses a tool-call JSON object against the schema. `defaults` supplies
// limit / rerank_pool / sort for omitted fields. Returns nullopt and a
// diagnostic for anything malformed (bad JSON, wrong types, bad
// timestamps, unknown role or sort). Never throws.
std::optional<ToolCall> parse_tool_call(const std::string& json_text,
                                        const SearchConstraints& defaults,
                                        std::string& diagnostic);

}  // namespace tkgqa
