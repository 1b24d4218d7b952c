#include "tkgqa/search.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "tkgqa/errors.hpp"
#include "tkgqa/kernels.hpp"
#include "tkgqa/util.hpp"

namespace tkgqa {

namespace {

// Sorted, deduplicated candidate ids from the posting lists selected by the
// symbolic constraints. nullopt means "axis absent".
std::optional<std::vector<FactId>> entity_axis(const TkgStore& store,
                                               const SearchConstraints& c) {
  if (c.entities.empty()) return std::nullopt;
  std::vector<FactId> ids;
  for (const auto& ec : c.entities) {
    const auto id = store.lookup_entity(ec.name);
    if (!id) continue;  // unknown name matches nothing
    if (ec.role == EntityRole::Head || ec.role == EntityRole::Any) {
      const auto& p = store.head_postings(*id);
      ids.insert(ids.end(), p.begin(), p.end());
    }
    if (ec.role == EntityRole::Tail || ec.role == EntityRole::Any) {
      const auto& p = store.tail_postings(*id);
      ids.insert(ids.end(), p.begin(), p.end());
    }
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::optional<std::vector<FactId>> relation_axis(const TkgStore& store,
                                                 const SearchConstraints& c) {
  if (c.relations.empty()) return std::nullopt;
  std::vector<FactId> ids;
  for (const auto& name : c.relations) {
    const auto id = store.lookup_relation(name);
    if (!id) continue;
    const auto& p = store.relation_postings(*id);
    ids.insert(ids.end(), p.begin(), p.end());
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::vector<FactId> intersect_sorted(const std::vector<FactId>& a,
                                     const std::vector<FactId>& b) {
  std::vector<FactId> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(out));
  return out;
}

}  // namespace

std::vector<FactId> filter_candidates(const TkgStore& store,
                                      const SearchConstraints& c) {
  const auto ent = entity_axis(store, c);
  const auto rel = relation_axis(store, c);

  std::optional<std::vector<FactId>> symbolic;
  if (ent && rel) {
    symbolic = intersect_sorted(*ent, *rel);
  } else if (ent) {
    symbolic = *ent;
  } else if (rel) {
    symbolic = *rel;
  }

  if (!c.time_window) {
    if (symbolic) return *symbolic;
    std::vector<FactId> all(store.fact_count());
    for (std::size_t i = 0; i < all.size(); ++i) {
      all[i] = static_cast<FactId>(i);
    }
    return all;
  }

  const TimeInterval window = *c.time_window;
  const auto& facts = store.facts();
  if (symbolic) {
    std::vector<FactId> out;
    out.reserve(symbolic->size());
    for (FactId id : *symbolic) {
      if (facts[id].interval.overlaps(window)) out.push_back(id);
    }
    return out;
  }

  // No symbolic axis: parallel predicate scan over the whole store.
  std::vector<std::uint8_t> flags;
  kernels::predicate_flags(
      facts.size(),
      [&](std::size_t i) { return facts[i].interval.overlaps(window); }, flags);
  return kernels::compact_flags(flags);
}

SearchResult search(const std::string& query, const SearchConstraints& c,
                    const TkgStore& store, const FactIndex& index,
                    Embedder& embedder) {
  SearchConstraints cons = c;
  cons.normalize();
  if (cons.limit < 1) throw UsageError("search limit must be positive");

  SearchResult result;
  const auto candidates = filter_candidates(store, cons);
  result.candidate_count = candidates.size();
  if (candidates.empty()) return result;

  const auto query_vec = embedder.embed_one(query);
  auto scored = score(query_vec, candidates, index);

  const auto by_score = [](const ScoredFact& a, const ScoredFact& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.fact_id < b.fact_id;
  };

  std::vector<ScoredFact> top;
  if (cons.sort_mode == SortMode::Relevance) {
    const std::size_t k =
        std::min<std::size_t>(scored.size(), static_cast<std::size_t>(cons.limit));
    std::partial_sort(scored.begin(), scored.begin() + k, scored.end(), by_score);
    top.assign(scored.begin(), scored.begin() + k);
  } else {
    const std::size_t pool = std::min<std::size_t>(
        scored.size(), static_cast<std::size_t>(cons.rerank_pool));
    std::partial_sort(scored.begin(), scored.begin() + pool, scored.end(),
                      by_score);
    scored.resize(pool);
    const bool desc = cons.time_descending;
    std::sort(scored.begin(), scored.end(),
              [&](const ScoredFact& a, const ScoredFact& b) {
                const auto sa = store.facts()[a.fact_id].interval.start_day;
                const auto sb = store.facts()[b.fact_id].interval.start_day;
                if (sa != sb) return desc ? sa > sb : sa < sb;
                return a.fact_id < b.fact_id;
              });
    const std::size_t k =
        std::min<std::size_t>(scored.size(), static_cast<std::size_t>(cons.limit));
    top.assign(scored.begin(), scored.begin() + k);
  }

  result.entries.reserve(top.size());
  for (const auto& sf : top) {
    const auto& q = store.facts()[sf.fact_id];
    result.entries.push_back({sf.fact_id, sf.score, verbalize_fact(q, store),
                              q.time_text});
  }
  return result;
}

std::string render_observation(const SearchResult& result) {
  std::string out;
  for (std::size_t i = 0; i < result.entries.size(); ++i) {
    const auto& e = result.entries[i];
    out += std::to_string(i + 1) + ". " + e.text + " [" + e.timestamp +
           "] (score=" + format_fixed(e.score, 3) + ")\n";
  }
  out += "candidates=" + std::to_string(result.candidate_count);
  return out;
}

namespace {

bool parse_role(const std::string& text, EntityRole& role) {
  if (text == "head") {
    role = EntityRole::Head;
  } else if (text == "tail") {
    role = EntityRole::Tail;
  } else if (text == "any") {
    role = EntityRole::Any;
  } else {
    return false;
  }
  return true;
}

}  // namespace

std::optional<ToolCall> parse_tool_call(const std::string& json_text,
                                        const SearchConstraints& defaults,
                                        std::string& diagnostic) {
  nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    diagnostic = "tool call is not a JSON object";
    return std::nullopt;
  }

  ToolCall call;
  call.constraints = defaults;
  call.constraints.entities.clear();
  call.constraints.relations.clear();
  call.constraints.time_window.reset();

  if (!j.contains("query") || !j["query"].is_string()) {
    diagnostic = "tool call needs a string \"query\" field";
    return std::nullopt;
  }
  call.query = j["query"].get<std::string>();

  std::optional<TimeInterval> start, end;
  const auto read_endpoint = [&](const char* key,
                                 std::optional<TimeInterval>& slot) {
    if (!j.contains(key)) return true;
    if (!j[key].is_string()) {
      diagnostic = std::string("\"") + key + "\" must be a timestamp string";
      return false;
    }
    try {
      slot = parse_timestamp(trim(j[key].get<std::string>()));
    } catch (const MalformedTimestamp& e) {
      diagnostic = std::string("bad \"") + key + "\": " + e.what();
      return false;
    }
    return true;
  };
  if (!read_endpoint("time_start", start)) return std::nullopt;
  if (!read_endpoint("time_end", end)) return std::nullopt;
  if (start || end) {
    TimeInterval window;
    window.granularity = Granularity::Interval;
    window.start_day = start ? start->start_day : kMinDay;
    window.end_day = end ? end->end_day : kMaxDay;
    if (window.start_day > window.end_day) {
      diagnostic = "time_start is after time_end";
      return std::nullopt;
    }
    call.constraints.time_window = window;
  }

  if (j.contains("entities")) {
    if (!j["entities"].is_array()) {
      diagnostic = "\"entities\" must be an array of {name, role?} objects";
      return std::nullopt;
    }
    for (const auto& item : j["entities"]) {
      if (!item.is_object() || !item.contains("name") ||
          !item["name"].is_string()) {
        diagnostic = "each entity constraint needs a string \"name\"";
        return std::nullopt;
      }
      EntityConstraint ec;
      ec.name = item["name"].get<std::string>();
      if (item.contains("role")) {
        if (!item["role"].is_string() ||
            !parse_role(item["role"].get<std::string>(), ec.role)) {
          diagnostic = "entity role must be \"head\", \"tail\" or \"any\"";
          return std::nullopt;
        }
      }
      call.constraints.entities.push_back(std::move(ec));
    }
  }

  if (j.contains("relations")) {
    if (!j["relations"].is_array()) {
      diagnostic = "\"relations\" must be an array of strings";
      return std::nullopt;
    }
    for (const auto& item : j["relations"]) {
      if (!item.is_string()) {
        diagnostic = "\"relations\" must be an array of strings";
        return std::nullopt;
      }
      call.constraints.relations.push_back(item.get<std::string>());
    }
  }

  if (j.contains("sort")) {
    if (!j["sort"].is_string()) {
      diagnostic = "\"sort\" must be \"relevance\" or \"time\"";
      return std::nullopt;
    }
    const auto s = j["sort"].get<std::string>();
    if (s == "relevance") {
      call.constraints.sort_mode = SortMode::Relevance;
    } else if (s == "time") {
      call.constraints.sort_mode = SortMode::Time;
    } else {
      diagnostic = "\"sort\" must be \"relevance\" or \"time\"";
      return std::nullopt;
    }
  }

  if (j.contains("limit")) {
    if (!j["limit"].is_number_integer()) {
      diagnostic = "\"limit\" must be an integer";
      return std::nullopt;
    }
    const auto limit = j["limit"].get<std::int64_t>();
    if (limit < 1 || limit > 100) {
      diagnostic = "\"limit\" must be in [1, 100]";
      return std::nullopt;
    }
    call.constraints.limit = static_cast<int>(limit);
  }

  call.constraints.normalize();
  diagnostic.clear();
  return call;
}

}  // namespace tkgqa
