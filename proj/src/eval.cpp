#include "tkgqa/eval.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tkgqa/errors.hpp"
#include "tkgqa/time_interval.hpp"
#include "tkgqa/util.hpp"

namespace tkgqa {

namespace {

const char* kStripPunct = ".,;:!?'\"()[]{}";

std::string strip_surrounding_punct(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  const std::string_view punct(kStripPunct);
  while (b < e && punct.find(s[b]) != std::string_view::npos) ++b;
  while (e > b && punct.find(s[e - 1]) != std::string_view::npos) --e;
  return s.substr(b, e - b);
}

int month_from_name(const std::string& token) {
  static const std::pair<const char*, int> kNames[] = {
      {"january", 1},  {"february", 2}, {"march", 3},     {"april", 4},
      {"may", 5},      {"june", 6},     {"july", 7},      {"august", 8},
      {"september", 9},{"october", 10}, {"november", 11}, {"december", 12},
      {"jan", 1},      {"feb", 2},      {"mar", 3},       {"apr", 4},
      {"jun", 6},      {"jul", 7},      {"aug", 8},       {"sep", 9},
      {"sept", 9},     {"oct", 10},     {"nov", 11},      {"dec", 12}};
  for (const auto& [name, number] : kNames) {
    if (token == name) return number;
  }
  return 0;
}

bool numeric(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  return true;
}

std::string canon_date(int year, int month, int day) {
  char buf[16];
  if (month == 0) {
    std::snprintf(buf, sizeof(buf), "%04d", year);
  } else if (day == 0) {
    std::snprintf(buf, sizeof(buf), "%04d-%02d", year, month);
  } else {
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
  }
  return buf;
}

bool valid_date(int year, int month, int day) {
  if (year < 1000 || year > 9999) return false;
  if (month == 0) return day == 0;
  if (month < 1 || month > 12) return false;
  if (day == 0) return true;
  return day >= 1 && day <= days_in_month(year, month);
}

// Recognizes date-like text and returns the canonical form at its expressed
// granularity; empty string when the text is not date-like.
std::string try_canonical_date(const std::string& text) {
  auto tokens = split_ws(text);
  for (auto& t : tokens) {
    while (!t.empty() && (t.back() == ',' || t.back() == '.')) t.pop_back();
  }
  std::erase_if(tokens, [](const std::string& t) { return t.empty(); });

  if (tokens.size() == 1) {
    const std::string& t = tokens[0];
    if (numeric(t)) {
      if (t.size() == 4) {
        const int y = std::stoi(t);
        return valid_date(y, 0, 0) ? canon_date(y, 0, 0) : "";
      }
      return "";
    }
    // Numeric with separators: YYYY-MM[-DD], also '/' or '.' separated.
    std::vector<std::string> parts;
    std::string cur;
    for (char c : t) {
      if (c == '-' || c == '/' || c == '.') {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    parts.push_back(cur);
    if (parts.size() < 2 || parts.size() > 3) return "";
    for (const auto& p : parts) {
      if (!numeric(p)) return "";
    }
    if (parts[0].size() != 4) return "";
    const int y = std::stoi(parts[0]);
    const int m = std::stoi(parts[1]);
    const int d = parts.size() == 3 ? std::stoi(parts[2]) : 0;
    if (parts.size() == 3 && d == 0) return "";
    return valid_date(y, m, d) ? canon_date(y, m, d) : "";
  }

  if (tokens.size() == 2) {
    // "march 2010" or "2010 march"
    int month = month_from_name(tokens[0]);
    std::string year_tok = tokens[1];
    if (month == 0) {
      month = month_from_name(tokens[1]);
      year_tok = tokens[0];
    }
    if (month == 0 || !numeric(year_tok) || year_tok.size() != 4) return "";
    const int y = std::stoi(year_tok);
    return valid_date(y, month, 0) ? canon_date(y, month, 0) : "";
  }

  if (tokens.size() == 3) {
    // "march 5 2010" or "5 march 2010"
    int month = 0, day = 0;
    if ((month = month_from_name(tokens[0])) != 0 && numeric(tokens[1])) {
      day = std::stoi(tokens[1]);
    } else if (numeric(tokens[0]) &&
               (month = month_from_name(tokens[1])) != 0) {
      day = std::stoi(tokens[0]);
    } else {
      return "";
    }
    if (!numeric(tokens[2]) || tokens[2].size() != 4 || day < 1) return "";
    const int y = std::stoi(tokens[2]);
    return valid_date(y, month, day) ? canon_date(y, month, day) : "";
  }

  return "";
}

}  // namespace

std::string normalize_answer(const std::string& text) {
  std::string s = collapse_ws(replace_all(to_lower(trim(text)), "_", " "));
  s = trim(strip_surrounding_punct(s));
  const std::string as_date = try_canonical_date(s);
  return as_date.empty() ? s : as_date;
}

int hits_at_1(const std::vector<std::string>& prediction,
              const std::vector<std::string>& gold) {
  if (prediction.empty()) return 0;
  const std::string first = normalize_answer(prediction.front());
  for (const auto& g : gold) {
    if (normalize_answer(g) == first) return 1;
  }
  return 0;
}

double pass_at_k(const std::vector<std::vector<int>>& per_question_rewards,
                 int k) {
  if (k < 1) throw KTooLarge("k must be >= 1");
  if (per_question_rewards.empty()) return 0.0;
  std::size_t passed = 0;
  for (const auto& rewards : per_question_rewards) {
    if (rewards.size() < static_cast<std::size_t>(k)) {
      throw KTooLarge("k=" + std::to_string(k) + " exceeds sample count " +
                      std::to_string(rewards.size()));
    }
    for (int i = 0; i < k; ++i) {
      if (rewards[static_cast<std::size_t>(i)] == 1) {
        ++passed;
        break;
      }
    }
  }
  return static_cast<double>(passed) /
         static_cast<double>(per_question_rewards.size());
}

std::optional<double> gold_fact_position(const Trajectory& t,
                                         const std::set<FactId>& gold_fact_ids) {
  if (t.steps.empty() || gold_fact_ids.empty()) return std::nullopt;
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    for (FactId id : t.steps[i].result_fact_ids) {
      if (gold_fact_ids.count(id)) {
        return static_cast<double>(i + 1) / static_cast<double>(t.steps.size());
      }
    }
  }
  return std::nullopt;
}

std::vector<CdfPoint> gold_fact_cdf(
    const std::vector<Trajectory>& trajectories,
    const std::vector<EvalRecord>& records,
    const std::map<std::string, std::set<FactId>>& gold_facts) {
  std::map<std::string, const EvalRecord*> by_id;
  for (const auto& r : records) by_id[r.question_id] = &r;

  std::vector<double> positions;
  for (const auto& t : trajectories) {
    const auto rec = by_id.find(t.question_id);
    if (rec == by_id.end()) continue;
    if (rec->second->hit != 1) continue;
    auto qt = rec->second->labels.find("question_type");
    if (qt == rec->second->labels.end() || qt->second != "multiple") continue;
    if (t.rounds_used <= 3) continue;
    const auto gf = gold_facts.find(t.question_id);
    if (gf == gold_facts.end()) continue;
    const auto pos = gold_fact_position(t, gf->second);
    if (pos) positions.push_back(*pos);
  }

  std::sort(positions.begin(), positions.end());
  std::vector<CdfPoint> cdf;
  const auto n = static_cast<double>(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    // Collapse duplicate positions into the highest cumulative value.
    if (!cdf.empty() && cdf.back().position == positions[i]) {
      cdf.back().cumulative = static_cast<double>(i + 1) / n;
    } else {
      cdf.push_back({positions[i], static_cast<double>(i + 1) / n});
    }
  }
  return cdf;
}

Report aggregate_report(const std::vector<EvalRecord>& records,
                        const std::vector<std::string>& grouping_keys) {
  Report report;
  report.total = records.size();
  for (const auto& r : records) report.hits += static_cast<std::size_t>(r.hit);

  std::vector<std::string> keys = grouping_keys;
  if (keys.empty()) {
    std::set<std::string> seen;
    for (const auto& r : records) {
      for (const auto& [k, v] : r.labels) seen.insert(k);
    }
    keys.assign(seen.begin(), seen.end());
  }

  for (const auto& key : keys) {
    std::map<std::string, ReportCell> cells;
    for (const auto& r : records) {
      const auto it = r.labels.find(key);
      if (it == r.labels.end()) continue;
      auto& cell = cells[it->second];
      cell.key = key;
      cell.value = it->second;
      cell.count += 1;
      cell.hits += static_cast<std::size_t>(r.hit);
    }
    for (auto& [value, cell] : cells) report.cells.push_back(cell);
  }
  return report;
}

std::string Report::to_tsv() const {
  std::string out = "scope\tvalue\tcount\thits\thits_at_1\n";
  out += "overall\t-\t" + std::to_string(total) + "\t" + std::to_string(hits) +
         "\t" +
         (total == 0 ? std::string("n/a")
                     : format_fixed(static_cast<double>(hits) /
                                        static_cast<double>(total),
                                    6)) +
         "\n";
  for (const auto& c : cells) {
    out += c.key + "\t" + c.value + "\t" + std::to_string(c.count) + "\t" +
           std::to_string(c.hits) + "\t" + format_fixed(c.rate(), 6) + "\n";
  }
  return out;
}

std::string Report::to_text() const {
  std::string out;
  if (total == 0) {
    out += "overall Hits@1: n/a (no records)\n";
    return out;
  }
  out += "overall Hits@1: " +
         format_fixed(static_cast<double>(hits) / static_cast<double>(total), 3) +
         " (" + std::to_string(hits) + "/" + std::to_string(total) + ")\n";
  std::string last_key;
  for (const auto& c : cells) {
    if (c.key != last_key) {
      out += c.key + ":\n";
      last_key = c.key;
    }
    out += "  " + c.value + ": " + format_fixed(c.rate(), 3) + " (" +
           std::to_string(c.hits) + "/" + std::to_string(c.count) + ")\n";
  }
  return out;
}

// --- file formats ---------------------------------------------------------

std::vector<QuestionRecord> load_questions(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open question file: " + path);
  std::vector<QuestionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw MalformedLine(line_no, "bad question record");
    }
    QuestionRecord q;
    q.id = j.value("id", "");
    q.text = j.value("text", "");
    if (q.id.empty() || q.text.empty()) {
      throw MalformedLine(line_no, "question record needs id and text");
    }
    for (const auto& a : j.value("answers", nlohmann::json::array())) {
      q.gold_answers.push_back(a.get<std::string>());
    }
    if (q.gold_answers.empty()) {
      throw MalformedLine(line_no, "question record needs non-empty answers");
    }
    if (j.contains("labels")) {
      for (const auto& [k, v] : j["labels"].items()) {
        q.labels[k] = v.get<std::string>();
      }
    }
    out.push_back(std::move(q));
  }
  return out;
}

void save_questions(const std::string& path,
                    const std::vector<QuestionRecord>& questions) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write question file: " + path);
  for (const auto& q : questions) {
    nlohmann::json j;
    j["id"] = q.id;
    j["text"] = q.text;
    j["answers"] = q.gold_answers;
    j["labels"] = q.labels;
    out << j.dump() << "\n";
  }
}

std::string eval_record_to_json(const EvalRecord& r) {
  nlohmann::json j;
  j["question_id"] = r.question_id;
  j["prediction"] = r.prediction;
  j["gold"] = r.gold;
  j["hit"] = r.hit;
  j["rounds_used"] = r.rounds_used;
  j["trajectory_ref"] = r.trajectory_ref;
  j["labels"] = r.labels;
  return j.dump();
}

EvalRecord eval_record_from_json(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad eval record: ") + e.what());
  }
  EvalRecord r;
  r.question_id = j.at("question_id").get<std::string>();
  r.prediction = j.value("prediction", std::vector<std::string>{});
  r.gold = j.value("gold", std::vector<std::string>{});
  r.hit = j.value("hit", 0);
  r.rounds_used = j.value("rounds_used", 0);
  r.trajectory_ref = j.value("trajectory_ref", "");
  if (j.contains("labels")) {
    for (const auto& [k, v] : j["labels"].items()) {
      r.labels[k] = v.get<std::string>();
    }
  }
  return r;
}

std::vector<EvalRecord> load_eval_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open results file: " + path);
  std::vector<EvalRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    out.push_back(eval_record_from_json(line));
  }
  return out;
}

void append_eval_record(const std::string& path, const EvalRecord& r) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot append to results file: " + path);
  out << eval_record_to_json(r) << "\n";
}

std::map<std::string, std::set<FactId>> load_gold_fact_sidecar(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open gold-fact sidecar: " + path);
  std::map<std::string, std::set<FactId>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 2) {
      throw MalformedLine(line_no, "expected question_id \\t fact ids");
    }
    auto& ids = out[trim(fields[0])];
    for (const auto& part : split(fields[1], ',')) {
      const auto t = trim(part);
      if (t.empty()) continue;
      ids.insert(static_cast<FactId>(std::stoul(t)));
    }
  }
  return out;
}

}  // namespace tkgqa
