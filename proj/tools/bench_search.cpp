// Benchmark: OpenMP search core vs the serial reference path on a synthetic
// graph. Verifies both paths agree before timing anything.
//
//   bench_search [facts] [dim] [queries]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "tkgqa/embedder.hpp"
#include "tkgqa/index.hpp"
#include "tkgqa/reference.hpp"
#include "tkgqa/search.hpp"
#include "tkgqa/store.hpp"

using namespace tkgqa;
using clock_type = std::chrono::steady_clock;

namespace {

double ms_since(clock_type::time_point t0) {
  return std::chrono::duration<double, std::milli>(clock_type::now() - t0).count();
}

TkgStore synthetic_store(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> ent(0, 499);
  std::uniform_int_distribution<int> rel(0, 39);
  std::uniform_int_distribution<int> year(2000, 2015);
  std::uniform_int_distribution<int> month(1, 12);
  std::uniform_int_distribution<int> day(1, 28);

  std::vector<std::array<std::string, 4>> rows;
  rows.reserve(n);
  char ts[16];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(ts, sizeof(ts), "%04d-%02d-%02d", year(rng), month(rng), day(rng));
    rows.push_back({"entity_" + std::to_string(ent(rng)),
                    "relation_" + std::to_string(rel(rng)),
                    "entity_" + std::to_string(ent(rng)), ts});
  }
  return TkgStore::from_rows(rows);
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t n_facts = argc > 1 ? std::stoul(argv[1]) : 200000;
  const std::size_t dim = argc > 2 ? std::stoul(argv[2]) : 64;
  const int n_queries = argc > 3 ? std::stoi(argv[3]) : 50;

#ifdef _OPENMP
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  std::printf("openmp: disabled (serial build)\n");
#endif
  std::printf("facts=%zu dim=%zu queries=%d\n", n_facts, dim, n_queries);

  const TkgStore store = synthetic_store(n_facts, 7);
  HashEmbedder embedder(dim, 42);

  auto t0 = clock_type::now();
  const FactIndex index = build_index(store, embedder, 4096);
  std::printf("index build: %8.1f ms\n", ms_since(t0));

  std::vector<std::string> queries;
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> pick(0, store.fact_count() - 1);
  for (int i = 0; i < n_queries; ++i) {
    queries.push_back(verbalize_fact(store.facts()[pick(rng)], store));
  }

  SearchConstraints wide;       // whole-store scoring
  wide.limit = 10;
  SearchConstraints windowed;   // time-filtered scan + scoring
  windowed.limit = 10;
  windowed.sort_mode = SortMode::Time;
  windowed.time_window = parse_timestamp("2004/2009");

  struct Case {
    const char* name;
    const SearchConstraints* c;
  } cases[] = {{"relevance, no filter", &wide}, {"time mode, 6y window", &windowed}};

  for (const auto& c : cases) {
    // Agreement check first.
    for (int i = 0; i < std::min(n_queries, 5); ++i) {
      const auto fast = search(queries[i], *c.c, store, index, embedder);
      const auto slow = reference::search(queries[i], *c.c, store, index, embedder);
      if (fast.entries.size() != slow.entries.size()) {
        std::fprintf(stderr, "MISMATCH on %s query %d\n", c.name, i);
        return 1;
      }
      for (std::size_t k = 0; k < fast.entries.size(); ++k) {
        if (fast.entries[k].fact_id != slow.entries[k].fact_id ||
            fast.entries[k].score != slow.entries[k].score) {
          std::fprintf(stderr, "MISMATCH on %s query %d rank %zu\n", c.name, i, k);
          return 1;
        }
      }
    }

    t0 = clock_type::now();
    for (const auto& q : queries) search(q, *c.c, store, index, embedder);
    const double parallel_ms = ms_since(t0) / n_queries;

    t0 = clock_type::now();
    for (const auto& q : queries) reference::search(q, *c.c, store, index, embedder);
    const double serial_ms = ms_since(t0) / n_queries;

    std::printf("%-24s parallel %8.2f ms/query | reference %8.2f ms/query | speedup %.2fx\n",
                c.name, parallel_ms, serial_ms, serial_ms / parallel_ms);
  }
  return 0;
}
