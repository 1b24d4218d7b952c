#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tkgqa/agent.hpp"

namespace tkgqa {

struct QuestionRecord {
  std::string id;
  std::string text;
  std::vector<std::string> gold_answers;          // non-empty
  std::map<std::string, std::string> labels;      // question_type, answer_type, ...
};

struct EvalRecord {
  std::string question_id;
  std::vector<std::string> prediction;
  std::vector<std::string> gold;
  int hit = 0;
  int rounds_used = 0;
  std::string trajectory_ref;                     // file:line or question id
  std::map<std::string, std::string> labels;
};

// Canonical answer form: trim -> lowercase -> underscores to spaces ->
// collapse whitespace -> strip surrounding punctuation; date-like answers
// re-serialize to YYYY[-MM[-DD]] at their expressed granularity. Idempotent.
std::string normalize_answer(const std::string& text);

// 1 iff the FIRST predicted answer, normalized, equals any normalized gold
// answer (rank-1 membership; multi-gold questions hit on any member).
int hits_at_1(const std::vector<std::string>& prediction,
              const std::vector<std::string>& gold);

// Fraction of questions whose first k rewards contain at least one 1.
// Direct first-k evaluation; throws KTooLarge if any list is shorter.
double pass_at_k(const std::vector<std::vector<int>>& per_question_rewards,
                 int k);

// Relative position (1-based step index / total steps) of the first step
// whose results contain any gold fact; nullopt when never observed.
std::optional<double> gold_fact_position(const Trajectory& t,
                                         const std::set<FactId>& gold_fact_ids);

// CDF over first-gold-fact positions for qualifying trajectories
// (hit == 1, question_type == "multiple", rounds_used > 3).
struct CdfPoint {
  double position = 0.0;
  double cumulative = 0.0;
};
std::vector<CdfPoint> gold_fact_cdf(
    const std::vector<Trajectory>& trajectories,
    const std::vector<EvalRecord>& records,
    const std::map<std::string, std::set<FactId>>& gold_facts);

// Aggregate table: overall Hits@1 plus one cell per (label key, label value).
struct ReportCell {
  std::string key;
  std::string value;
  std::size_t count = 0;
  std::size_t hits = 0;
  double rate() const {
    return count == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(count);
  }
};
struct Report {
  std::size_t total = 0;
  std::size_t hits = 0;
  std::vector<ReportCell> cells;  // deterministic order: key, then value
  std::string to_tsv() const;
  std::string to_text() const;
};
Report aggregate_report(const std::vector<EvalRecord>& records,
                        const std::vector<std::string>& grouping_keys = {});

// --- file formats ---------------------------------------------------------

// Question file: JSONL {id, text, answers:[...], labels:{...}}.
std::vector<QuestionRecord> load_questions(const std::string& path);
void save_questions(const std::string& path,
                    const std::vector<QuestionRecord>& questions);

// Results file: JSONL EvalRecord.
std::string eval_record_to_json(const EvalRecord& r);
EvalRecord eval_record_from_json(const std::string& line);
std::vector<EvalRecord> load_eval_records(const std::string& path);
void append_eval_record(const std::string& path, const EvalRecord& r);

// Gold-fact sidecar: TSV "question_id \t fact_id,fact_id,...".
std::map<std::string, std::set<FactId>> load_gold_fact_sidecar(
    const std::string& path);

}  // namespace tkgqa
