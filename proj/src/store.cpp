#include "tkgqa/store.hpp"

#include <filesystem>
#include <fstream>

#include "tkgqa/errors.hpp"
#include "tkgqa/util.hpp"

namespace tkgqa {

const std::vector<FactId> TkgStore::kEmptyPostings{};

std::uint32_t Interner::intern(std::string_view name) {
  auto it = ids_.find(std::string(name));
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(name);
  ids_.emplace(names_.back(), id);
  return id;
}

std::optional<std::uint32_t> Interner::lookup(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

void TkgStore::add_row(std::size_t line_no, const std::string& head,
                       const std::string& relation, const std::string& tail,
                       const std::string& timestamp) {
  Quadruple q;
  q.fact_id = static_cast<FactId>(facts_.size());
  q.head = entities_.intern(head);
  q.relation = relations_.intern(relation);
  q.tail = entities_.intern(tail);
  q.time_text = timestamp;
  try {
    q.interval = parse_timestamp(timestamp);
  } catch (const MalformedTimestamp& e) {
    throw MalformedLine(line_no, e.what());
  }
  facts_.push_back(std::move(q));
}

TkgStore TkgStore::load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open graph file: " + path);

  TkgStore store;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') continue;
    auto fields = split(line, '\t');
    if (fields.size() != 4) {
      throw MalformedLine(line_no, "expected 4 tab-separated fields, got " +
                                       std::to_string(fields.size()));
    }
    for (auto& f : fields) f = trim(f);
    store.add_row(line_no, fields[0], fields[1], fields[2], fields[3]);
  }
  if (in.bad()) throw IoError("read error on graph file: " + path);
  store.build_postings();
  return store;
}

TkgStore TkgStore::from_rows(
    const std::vector<std::array<std::string, 4>>& rows) {
  TkgStore store;
  std::size_t line_no = 0;
  for (const auto& r : rows) {
    ++line_no;
    store.add_row(line_no, trim(r[0]), trim(r[1]), trim(r[2]), trim(r[3]));
  }
  store.build_postings();
  return store;
}

void TkgStore::build_postings() {
  head_postings_.assign(entities_.size(), {});
  tail_postings_.assign(entities_.size(), {});
  relation_postings_.assign(relations_.size(), {});
  for (const auto& q : facts_) {
    head_postings_[q.head].push_back(q.fact_id);
    tail_postings_[q.tail].push_back(q.fact_id);
    relation_postings_[q.relation].push_back(q.fact_id);
  }
}

const Quadruple& TkgStore::fact(FactId id) const {
  if (id >= facts_.size()) throw UnknownFactId(id);
  return facts_[id];
}

std::optional<EntityId> TkgStore::lookup_entity(std::string_view name) const {
  return entities_.lookup(trim(name));
}

std::optional<RelationId> TkgStore::lookup_relation(
    std::string_view name) const {
  return relations_.lookup(trim(name));
}

const std::vector<FactId>& TkgStore::head_postings(EntityId id) const {
  if (id >= head_postings_.size()) return kEmptyPostings;
  return head_postings_[id];
}

const std::vector<FactId>& TkgStore::tail_postings(EntityId id) const {
  if (id >= tail_postings_.size()) return kEmptyPostings;
  return tail_postings_[id];
}

const std::vector<FactId>& TkgStore::relation_postings(RelationId id) const {
  if (id >= relation_postings_.size()) return kEmptyPostings;
  return relation_postings_[id];
}

std::string TkgStore::fact_row(FactId id) const {
  const auto& q = fact(id);
  return entity_name(q.head) + "\t" + relation_name(q.relation) + "\t" +
         entity_name(q.tail) + "\t" + q.time_text;
}

void TkgStore::save_artifacts(const std::string& dir) const {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + dir);

  const auto write_file = [&](const std::string& name, auto&& body) {
    const std::string path = dir + "/" + name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write: " + path);
    body(out);
    out.flush();
    if (!out) throw IoError("write failed: " + path);
  };

  write_file("facts.tsv", [&](std::ofstream& out) {
    for (const auto& q : facts_) out << fact_row(q.fact_id) << "\n";
  });
  write_file("entities.tsv", [&](std::ofstream& out) {
    for (std::size_t i = 0; i < entities_.size(); ++i) {
      out << i << "\t" << entities_.name(static_cast<std::uint32_t>(i)) << "\n";
    }
  });
  write_file("relations.tsv", [&](std::ofstream& out) {
    for (std::size_t i = 0; i < relations_.size(); ++i) {
      out << i << "\t" << relations_.name(static_cast<std::uint32_t>(i)) << "\n";
    }
  });
}

TkgStore TkgStore::load_artifacts(const std::string& dir) {
  return load_graph(dir + "/facts.tsv");
}

}  // namespace tkgqa
