#pragma once

#include <span>
#include <string>
#include <vector>

#include "tkgqa/search.hpp"

namespace tkgqa::reference {

// Serial reference path for the search core. Deliberately written as the
// plainest possible linear scan + full stable sort, independent of the
// kernel/postings implementation in tkgqa::filter_candidates / tkgqa::search.
// Tests use it as the equivalence oracle; the benchmark compares against it.

// True iff the fact satisfies every present constraint.
bool matches(const TkgStore& store, FactId id, const SearchConstraints& c);

std::vector<FactId> filter_candidates(const TkgStore& store,
                                      const SearchConstraints& c);

double dot(std::span<const float> a, std::span<const float> b);

SearchResult search(const std::string& query, const SearchConstraints& c,
                    const TkgStore& store, const FactIndex& index,
                    Embedder& embedder);

}  // namespace tkgqa::reference
