#include "tkgqa/reference.hpp"

#include <algorithm>

#include "tkgqa/util.hpp"

namespace tkgqa::reference {

bool matches(const TkgStore& store, FactId id, const SearchConstraints& c) {
  const Quadruple& q = store.facts()[id];

  if (c.time_window) {
    const TimeInterval& w = *c.time_window;
    if (!(q.interval.start_day <= w.end_day && q.interval.end_day >= w.start_day)) {
      return false;
    }
  }

  if (!c.entities.empty()) {
    bool any = false;
    for (const auto& ec : c.entities) {
      const std::string wanted = trim(ec.name);
      const bool head_ok = (ec.role == EntityRole::Head || ec.role == EntityRole::Any) &&
                           store.entity_name(q.head) == wanted;
      const bool tail_ok = (ec.role == EntityRole::Tail || ec.role == EntityRole::Any) &&
                           store.entity_name(q.tail) == wanted;
      if (head_ok || tail_ok) {
        any = true;
        break;
      }
    }
    if (!any) return false;
  }

  if (!c.relations.empty()) {
    bool any = false;
    for (const auto& name : c.relations) {
      if (store.relation_name(q.relation) == trim(name)) {
        any = true;
        break;
      }
    }
    if (!any) return false;
  }

  return true;
}

std::vector<FactId> filter_candidates(const TkgStore& store,
                                      const SearchConstraints& c) {
  std::vector<FactId> out;
  for (FactId id = 0; id < store.fact_count(); ++id) {
    if (matches(store, id, c)) out.push_back(id);
  }
  return out;
}

double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

SearchResult search(const std::string& query, const SearchConstraints& c,
                    const TkgStore& store, const FactIndex& index,
                    Embedder& embedder) {
  SearchConstraints cons = c;
  cons.normalize();

  SearchResult result;
  const auto candidates = reference::filter_candidates(store, cons);
  result.candidate_count = candidates.size();
  if (candidates.empty()) return result;

  const auto query_vec = embedder.embed_one(query);
  std::vector<ScoredFact> scored;
  scored.reserve(candidates.size());
  for (FactId id : candidates) {
    scored.push_back({id, dot(query_vec, index.row(id))});
  }

  std::stable_sort(scored.begin(), scored.end(),
                   [](const ScoredFact& a, const ScoredFact& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.fact_id < b.fact_id;
                   });

  if (cons.sort_mode == SortMode::Time) {
    if (scored.size() > static_cast<std::size_t>(cons.rerank_pool)) {
      scored.resize(static_cast<std::size_t>(cons.rerank_pool));
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [&](const ScoredFact& a, const ScoredFact& b) {
                       const auto sa = store.facts()[a.fact_id].interval.start_day;
                       const auto sb = store.facts()[b.fact_id].interval.start_day;
                       if (sa != sb) {
                         return cons.time_descending ? sa > sb : sa < sb;
                       }
                       return a.fact_id < b.fact_id;
                     });
  }

  if (scored.size() > static_cast<std::size_t>(cons.limit)) {
    scored.resize(static_cast<std::size_t>(cons.limit));
  }

  for (const auto& sf : scored) {
    const auto& q = store.facts()[sf.fact_id];
    result.entries.push_back({sf.fact_id, sf.score, verbalize_fact(q, store),
                              q.time_text});
  }
  return result;
}

}  // namespace tkgqa::reference
