#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tkgqa/agent.hpp"
#include "tkgqa/eval.hpp"

namespace tkgqa {

// G sampled traces for one question with their binary rule rewards.
struct TraceGroup {
  std::string question_id;
  std::vector<Trajectory> traces;
  std::vector<int> rewards;  // same length as traces
};

// A distilled lesson plus its exemplar digest, sourced from a reward-1
// trace. validation_gain is filled in by update_library.
struct AdvantageExperience {
  std::string text;
  std::string source_question_id;
  int source_trace_index = -1;
  int rank_score = 0;                    // 1 = ranked most instructive
  std::optional<double> validation_gain;
  bool ranking_fallback = false;         // LLM ranking was unparseable
};

// Budget-K library of advantage experiences with provenance bookkeeping.
class ExperienceLibrary {
 public:
  explicit ExperienceLibrary(int budget = 3) : budget_(budget) {}

  int budget() const { return budget_; }
  const std::vector<AdvantageExperience>& entries() const { return entries_; }
  std::vector<std::string> demonstration_texts() const;
  void set_entries(std::vector<AdvantageExperience> entries);
  const nlohmann::json& provenance() const { return provenance_; }
  void log_event(nlohmann::json event);

  // Versioned JSON file {schema_version, budget, entries, provenance}.
  void save(const std::string& path) const;
  static ExperienceLibrary load(const std::string& path);

 private:
  int budget_;
  std::vector<AdvantageExperience> entries_;
  nlohmann::json provenance_ = nlohmann::json::array();
};

struct MinerConfig {
  int group_size = 4;      // G: traces sampled per question
  int batch_size = 50;     // N: questions per mining round
  int budget = 3;          // K: library budget
  int rounds = 1;          // passes over the training batch
  int resample_budget = 2; // extra attempts for transport-failed episodes
  int val_slice = 200;     // validation questions used to measure gain
  std::uint64_t seed = 0;
  EpisodeConfig episode;   // template; demonstrations filled per call
};

// Deterministic one-sentence/two-line compression of a trajectory used in
// ranking prompts and experience texts.
std::string trajectory_digest(const Trajectory& t, const QuestionRecord& q);

// Binary rule reward: 1 iff the trace answered and its top answer hits the
// gold set (same normalization as eval); unanswered traces score 0.
int score_trace(const Trajectory& t, const std::vector<std::string>& gold);

// Samples G traces per question. Transport-failed episodes are resampled up
// to cfg.resample_budget extra attempts, then recorded as reward-0
// protocol-failure placeholders (the failure is surfaced in the group).
std::vector<TraceGroup> sample_groups(const std::vector<QuestionRecord>& questions,
                                      int group_size, const MinerConfig& cfg,
                                      const SearchContext& ctx,
                                      ChatGateway& gateway);

// Ranks the group's successful traces by marginal instructional value via
// the gateway and distills lessons for the top_k. An unparseable ranking is
// re-asked twice, then falls back to ordering by (fewest rounds, lowest
// episode cost) with digest-only texts and a fallback marker.
std::vector<AdvantageExperience> distill_advantages(const TraceGroup& group,
                                                    const QuestionRecord& question,
                                                    ChatGateway& gateway,
                                                    int top_k);

// Measures each candidate's validation gain (accuracy delta on the slice,
// candidate appended; at budget the lowest-gain incumbent is evicted for
// the measurement and restored after) and keeps the top-K by recorded gain
// over incumbents and positive-gain candidates; ties favor incumbents.
ExperienceLibrary update_library(const ExperienceLibrary& lib,
                                 std::vector<AdvantageExperience> candidates,
                                 const std::vector<QuestionRecord>& val_questions,
                                 const MinerConfig& cfg,
                                 const SearchContext& ctx,
                                 ChatGateway& gateway);

// Mean hits_at_1 of one episode per question with the given demonstrations.
double validation_accuracy(const std::vector<QuestionRecord>& questions,
                           const std::vector<std::string>& demonstrations,
                           const MinerConfig& cfg, const SearchContext& ctx,
                           ChatGateway& gateway);

struct MiningReportRow {
  int round = 0;
  std::string question_id;
  int trace_index = -1;
  int rank_score = 0;
  double validation_gain = 0.0;
  bool admitted = false;
  bool skipped = false;
};

struct MiningOutcome {
  ExperienceLibrary library;
  std::vector<MiningReportRow> report;
  int groups_sampled = 0;
  int successful_traces = 0;
  std::vector<std::string> notices;  // per-question sampling problems etc.
};

// Full pipeline: sample groups, score, distill, update the library.
MiningOutcome mine(const std::vector<QuestionRecord>& train_questions,
                   const std::vector<QuestionRecord>& val_questions,
                   const MinerConfig& cfg, const SearchContext& ctx,
                   ChatGateway& gateway);

std::string mining_report_tsv(const std::vector<MiningReportRow>& rows);

}  // namespace tkgqa
