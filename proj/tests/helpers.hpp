#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "tkgqa/embedder.hpp"
#include "tkgqa/search.hpp"
#include "tkgqa/store.hpp"

namespace testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    for (int i = 0; i < 1000; ++i) {
      auto candidate = base / ("tkgqa_test_" + std::to_string(std::rand()) +
                               "_" + std::to_string(i));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    std::abort();
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << body;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Random tsv-quad rows over small entity/relation/date pools, mixing all
// timestamp granularities.
inline std::vector<std::array<std::string, 4>> random_rows(std::size_t n,
                                                           std::uint64_t seed,
                                                           int entity_pool = 30,
                                                           int relation_pool = 8) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> ent(0, entity_pool - 1);
  std::uniform_int_distribution<int> rel(0, relation_pool - 1);
  std::uniform_int_distribution<int> year(2000, 2012);
  std::uniform_int_distribution<int> month(1, 12);
  std::uniform_int_distribution<int> day(1, 28);
  std::uniform_int_distribution<int> kind(0, 9);

  std::vector<std::array<std::string, 4>> rows;
  rows.reserve(n);
  char buf[32];
  for (std::size_t i = 0; i < n; ++i) {
    const int k = kind(rng);
    if (k < 6) {
      std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year(rng), month(rng), day(rng));
    } else if (k < 8) {
      std::snprintf(buf, sizeof(buf), "%04d-%02d", year(rng), month(rng));
    } else if (k < 9) {
      std::snprintf(buf, sizeof(buf), "%04d", year(rng));
    } else {
      const int y = year(rng);
      std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d/%04d-%02d-%02d", y,
                    month(rng), day(rng), y + 1, month(rng), day(rng));
    }
    rows.push_back({"Entity_" + std::to_string(ent(rng)),
                    "relation_" + std::to_string(rel(rng)),
                    "Entity_" + std::to_string(ent(rng)), buf});
  }
  return rows;
}

inline tkgqa::TkgStore random_store(std::size_t n, std::uint64_t seed) {
  return tkgqa::TkgStore::from_rows(random_rows(n, seed));
}

// Random constraints drawing names from the store (sometimes unknown ones).
inline tkgqa::SearchConstraints random_constraints(const tkgqa::TkgStore& store,
                                                   std::mt19937_64& rng) {
  using namespace tkgqa;
  SearchConstraints c;
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> year(2000, 2012);
  std::uniform_int_distribution<int> limit(1, 30);
  std::uniform_int_distribution<int> pool(1, 60);

  if (coin(rng)) {
    const int a = year(rng);
    const int b = year(rng);
    TimeInterval w;
    w.start_day = date_to_ordinal(std::min(a, b), 1, 1);
    w.end_day = date_to_ordinal(std::max(a, b), 12, 31);
    w.granularity = Granularity::Interval;
    c.time_window = w;
  }
  if (coin(rng) && store.entity_count() > 0) {
    std::uniform_int_distribution<std::uint32_t> pick(
        0, static_cast<std::uint32_t>(store.entity_count() - 1));
    std::uniform_int_distribution<int> role(0, 2);
    const int n_entities = 1 + coin(rng);
    for (int i = 0; i < n_entities; ++i) {
      EntityConstraint ec;
      ec.name = coin(rng) == 0 && i == 0 ? "no_such_entity"
                                         : store.entity_name(pick(rng));
      ec.role = static_cast<EntityRole>(role(rng));
      c.entities.push_back(std::move(ec));
    }
  }
  if (coin(rng) && store.relation_count() > 0) {
    std::uniform_int_distribution<std::uint32_t> pick(
        0, static_cast<std::uint32_t>(store.relation_count() - 1));
    c.relations.push_back(coin(rng) == 0 ? "no_such_relation"
                                         : store.relation_name(pick(rng)));
  }
  c.sort_mode = coin(rng) ? tkgqa::SortMode::Time : tkgqa::SortMode::Relevance;
  c.limit = limit(rng);
  c.rerank_pool = pool(rng);
  c.normalize();
  return c;
}

}  // namespace testing
