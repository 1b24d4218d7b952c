#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tkgqa/time_interval.hpp"

namespace tkgqa {

using FactId = std::uint32_t;
using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

// One temporal fact. fact_id is dense (0..N-1) in ingestion order.
// time_text keeps the timestamp exactly as ingested; verbalization and
// observation rendering reuse it verbatim.
struct Quadruple {
  FactId fact_id = 0;
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;
  TimeInterval interval;
  std::string time_text;
};

// Bidirectional string<->id map. Ids are dense in first-seen order.
class Interner {
 public:
  std::uint32_t intern(std::string_view name);
  std::optional<std::uint32_t> lookup(std::string_view name) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

// Immutable after build; safe to share across concurrent readers.
class TkgStore {
 public:
  // tsv-quad format: UTF-8, head \t relation \t tail \t timestamp per line,
  // '#'-prefixed lines ignored, blank lines ignored. Aborts on the first
  // malformed line with its 1-based line number.
  static TkgStore load_graph(const std::string& path);

  // Builds a store from in-memory rows (head, relation, tail, timestamp).
  static TkgStore from_rows(
      const std::vector<std::array<std::string, 4>>& rows);

  const std::vector<Quadruple>& facts() const { return facts_; }
  const Quadruple& fact(FactId id) const;
  std::size_t fact_count() const { return facts_.size(); }

  // Exact-string lookup after whitespace trim; absent keys -> nullopt.
  std::optional<EntityId> lookup_entity(std::string_view name) const;
  std::optional<RelationId> lookup_relation(std::string_view name) const;

  const std::string& entity_name(EntityId id) const { return entities_.name(id); }
  const std::string& relation_name(RelationId id) const { return relations_.name(id); }
  std::size_t entity_count() const { return entities_.size(); }
  std::size_t relation_count() const { return relations_.size(); }

  const std::vector<FactId>& head_postings(EntityId id) const;
  const std::vector<FactId>& tail_postings(EntityId id) const;
  const std::vector<FactId>& relation_postings(RelationId id) const;

  // Re-serializes a fact as its tsv-quad row.
  std::string fact_row(FactId id) const;

  // Persists facts.tsv, entities.tsv, relations.tsv under dir.
  // Dictionary files are two-column TSV (id \t name).
  void save_artifacts(const std::string& dir) const;
  static TkgStore load_artifacts(const std::string& dir);

 private:
  void add_row(std::size_t line_no, const std::string& head,
               const std::string& relation, const std::string& tail,
               const std::string& timestamp);
  void build_postings();

  std::vector<Quadruple> facts_;
  Interner entities_;
  Interner relations_;
  std::vector<std::vector<FactId>> head_postings_;
  std::vector<std::vector<FactId>> tail_postings_;
  std::vector<std::vector<FactId>> relation_postings_;
  static const std::vector<FactId> kEmptyPostings;
};

}  // namespace tkgqa
