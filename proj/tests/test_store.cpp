#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <map>
#include <random>
#include <set>

#include "helpers.hpp"
#include "tkgqa/errors.hpp"
#include "tkgqa/store.hpp"
#include "tkgqa/time_interval.hpp"

using namespace tkgqa;

namespace {

// Independent calendar oracle built on std::chrono; the implementation uses
// its own ordinal arithmetic.
std::int32_t chrono_ordinal(int y, unsigned m, unsigned d) {
  using namespace std::chrono;
  const sys_days sd{year{y} / month{m} / day{d}};
  // sys_days counts from 1970-01-01; Rata Die ordinal of that day is 719163.
  return static_cast<std::int32_t>(sd.time_since_epoch().count()) + 719163;
}

unsigned chrono_last_day(int y, unsigned m) {
  using namespace std::chrono;
  const year_month_day_last ymdl{year{y}, month_day_last{month{m}}};
  return static_cast<unsigned>(static_cast<year_month_day>(ymdl).day());
}

}  // namespace

TEST_CASE("parse_timestamp handles each granularity") {
  const auto day = parse_timestamp("2010-03-05");
  CHECK(day.granularity == Granularity::Day);
  CHECK(day.start_day == day.end_day);
  CHECK(day.start_day == chrono_ordinal(2010, 3, 5));

  const auto month = parse_timestamp("2010-03");
  CHECK(month.granularity == Granularity::Month);
  CHECK(month.start_day == chrono_ordinal(2010, 3, 1));
  CHECK(month.end_day == chrono_ordinal(2010, 3, 31));

  const auto year = parse_timestamp("2004");
  CHECK(year.granularity == Granularity::Year);
  CHECK(year.start_day == chrono_ordinal(2004, 1, 1));
  CHECK(year.end_day == chrono_ordinal(2004, 12, 31));
  CHECK(year.end_day - year.start_day + 1 == 366);  // leap year

  const auto range = parse_timestamp("2010-01-01/2010-12-31");
  CHECK(range.granularity == Granularity::Interval);
  CHECK(range.start_day == chrono_ordinal(2010, 1, 1));
  CHECK(range.end_day == chrono_ordinal(2010, 12, 31));

  const auto mixed = parse_timestamp("2004/2006-03");
  CHECK(mixed.start_day == chrono_ordinal(2004, 1, 1));
  CHECK(mixed.end_day == chrono_ordinal(2006, 3, 31));
}

TEST_CASE("parse_timestamp rejects malformed input") {
  CHECK_THROWS_AS(parse_timestamp(""), MalformedTimestamp);
  CHECK_THROWS_AS(parse_timestamp("banana"), MalformedTimestamp);
  CHECK_THROWS_AS(parse_timestamp("2010-13"), MalformedTimestamp);
  CHECK_THROWS_AS(parse_timestamp("2010-00"), MalformedTimestamp);
  CHECK_THROWS_AS(parse_timestamp("2010-02-30"), MalformedTimestamp);
  CHECK_THROWS_AS(parse_timestamp("1999-02-29"), MalformedTimestamp);  // not leap
  CHECK_THROWS_AS(parse_timestamp("2010-3-5"), MalformedTimestamp);    // widths fixed
  CHECK_THROWS_AS(parse_timestamp("2012/2010"), MalformedTimestamp);   // inverted
  CHECK_THROWS_AS(parse_timestamp("2010/2011/2012"), MalformedTimestamp);
  CHECK_NOTHROW(parse_timestamp("2000-02-29"));  // leap century year
}

TEST_CASE("month and year bounds match the calendar oracle, 1900-2100") {
  char buf[16];
  for (int y = 1900; y <= 2100; ++y) {
    std::snprintf(buf, sizeof(buf), "%04d", y);
    const auto iv = parse_timestamp(buf);
    REQUIRE(iv.start_day == chrono_ordinal(y, 1, 1));
    REQUIRE(iv.end_day == chrono_ordinal(y, 12, 31));
    for (int m = 1; m <= 12; ++m) {
      std::snprintf(buf, sizeof(buf), "%04d-%02d", y, m);
      const auto mv = parse_timestamp(buf);
      REQUIRE(mv.start_day == chrono_ordinal(y, static_cast<unsigned>(m), 1));
      REQUIRE(mv.end_day == chrono_ordinal(y, static_cast<unsigned>(m),
                                           chrono_last_day(y, static_cast<unsigned>(m))));
    }
  }
}

TEST_CASE("ordinal round-trips through ordinal_to_date") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::int32_t> pick(1, date_to_ordinal(9999, 12, 31));
  for (int i = 0; i < 2000; ++i) {
    const auto ord = pick(rng);
    int y, m, d;
    ordinal_to_date(ord, y, m, d);
    CHECK(date_to_ordinal(y, m, d) == ord);
  }
}

TEST_CASE("load_graph ingests a 3-line file in order") {
  testing::TempDir dir;
  const auto path = dir.file("g.tsv");
  testing::write_file(path,
                      "A\tmet\tB\t2004-01-02\n"
                      "# a comment line\n"
                      "\n"
                      "B\tvisited\tC\t2005\n"
                      "A\tmet\tB\t2004-01-02\n");  // duplicate preserved
  const auto store = TkgStore::load_graph(path);
  REQUIRE(store.fact_count() == 3);
  CHECK(store.facts()[0].fact_id == 0);
  CHECK(store.facts()[1].fact_id == 1);
  CHECK(store.facts()[2].fact_id == 2);
  CHECK(store.fact_row(0) == "A\tmet\tB\t2004-01-02");
  CHECK(store.fact_row(2) == "A\tmet\tB\t2004-01-02");
  CHECK(store.facts()[0].head == store.facts()[2].head);
  CHECK(store.entity_count() == 3);
  CHECK(store.relation_count() == 2);
}

TEST_CASE("load_graph reports the first malformed line") {
  testing::TempDir dir;
  const auto path = dir.file("bad.tsv");
  testing::write_file(path, "A\tmet\tB\t2004\nA\tmet\tB\n");
  try {
    TkgStore::load_graph(path);
    FAIL("expected MalformedLine");
  } catch (const MalformedLine& e) {
    CHECK(e.line_no() == 2);
  }

  testing::write_file(path, "A\tmet\tB\tnot-a-date\n");
  try {
    TkgStore::load_graph(path);
    FAIL("expected MalformedLine");
  } catch (const MalformedLine& e) {
    CHECK(e.line_no() == 1);
  }

  CHECK_THROWS_AS(TkgStore::load_graph(dir.file("missing.tsv")), IoError);
}

TEST_CASE("lookup trims and round-trips; unknown names are empty") {
  const auto store = TkgStore::from_rows({{"Abdul_Hamid", "met", "B", "2004"}});
  const auto id = store.lookup_entity("Abdul_Hamid");
  REQUIRE(id.has_value());
  CHECK(store.entity_name(*id) == "Abdul_Hamid");
  CHECK(store.lookup_entity("  Abdul_Hamid ") == id);
  CHECK_FALSE(store.lookup_entity("abdul_hamid").has_value());  // exact match
  CHECK_FALSE(store.lookup_entity("nobody").has_value());
  CHECK_FALSE(store.lookup_relation("nothing").has_value());
  CHECK(store.lookup_relation("met\t") == store.lookup_relation("met"));
}

TEST_CASE("postings equal a brute-force scan on random stores") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const auto store = testing::random_store(400, seed);
    for (std::uint32_t e = 0; e < store.entity_count(); ++e) {
      std::vector<FactId> heads, tails;
      for (const auto& q : store.facts()) {
        if (q.head == e) heads.push_back(q.fact_id);
        if (q.tail == e) tails.push_back(q.fact_id);
      }
      REQUIRE(store.head_postings(e) == heads);
      REQUIRE(store.tail_postings(e) == tails);
    }
    for (std::uint32_t r = 0; r < store.relation_count(); ++r) {
      std::vector<FactId> expect;
      for (const auto& q : store.facts()) {
        if (q.relation == r) expect.push_back(q.fact_id);
      }
      REQUIRE(store.relation_postings(r) == expect);
    }
  }
}

TEST_CASE("facts round-trip through re-serialization") {
  const auto store = testing::random_store(300, 21);
  std::vector<std::array<std::string, 4>> rows;
  for (const auto& q : store.facts()) {
    rows.push_back({store.entity_name(q.head), store.relation_name(q.relation),
                    store.entity_name(q.tail), q.time_text});
  }
  const auto again = TkgStore::from_rows(rows);
  REQUIRE(again.fact_count() == store.fact_count());
  for (FactId id = 0; id < store.fact_count(); ++id) {
    const auto& a = store.facts()[id];
    const auto& b = again.facts()[id];
    CHECK(store.entity_name(a.head) == again.entity_name(b.head));
    CHECK(store.relation_name(a.relation) == again.relation_name(b.relation));
    CHECK(store.entity_name(a.tail) == again.entity_name(b.tail));
    CHECK(a.interval == b.interval);
    CHECK(a.time_text == b.time_text);
  }
}

TEST_CASE("artifacts persist byte-identically and reload") {
  testing::TempDir dir;
  const auto store = testing::random_store(120, 31);
  store.save_artifacts(dir.file("a"));
  store.save_artifacts(dir.file("b"));
  CHECK(testing::read_file(dir.file("a") + "/facts.tsv") ==
        testing::read_file(dir.file("b") + "/facts.tsv"));
  CHECK(testing::read_file(dir.file("a") + "/entities.tsv") ==
        testing::read_file(dir.file("b") + "/entities.tsv"));

  const auto loaded = TkgStore::load_artifacts(dir.file("a"));
  REQUIRE(loaded.fact_count() == store.fact_count());
  for (FactId id = 0; id < store.fact_count(); ++id) {
    CHECK(loaded.fact_row(id) == store.fact_row(id));
  }
}

TEST_CASE("interval overlap is inclusive on both ends") {
  const auto year = parse_timestamp("2005");
  const auto march = parse_timestamp("2005-03");
  const auto day = parse_timestamp("2005-12-31");
  const auto outside = parse_timestamp("2006-01-01");
  CHECK(year.overlaps(march));
  CHECK(march.overlaps(year));
  CHECK(year.overlaps(day));
  CHECK_FALSE(year.overlaps(outside));
  CHECK(outside.overlaps(parse_timestamp("2006")));
}
