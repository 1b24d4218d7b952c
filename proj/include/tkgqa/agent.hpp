#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tkgqa/gateway.hpp"
#include "tkgqa/search.hpp"

namespace tkgqa {

enum class ActionKind { Search, Answer, Malformed };

// Parsed model output. Exactly one of search_payload / answer_text is
// present for non-Malformed kinds; think_text rides alongside.
struct AgentAction {
  ActionKind kind = ActionKind::Malformed;
  std::optional<ToolCall> search_payload;
  std::string raw_search_json;               // payload as emitted, for audit
  std::optional<std::string> answer_text;    // raw answer block
  std::vector<std::string> answers;          // answer_text split on '|'
  std::string think_text;
  std::string diagnostic;                    // why Malformed
};

// Total parse of one model turn. Grammar: optional <think>...</think>, then
// exactly one of <search>{tool-call JSON}</search> or <answer>...</answer>.
// The first well-formed action block wins when several appear; anything
// else maps to Malformed with a diagnostic. Never throws.
AgentAction parse_agent_output(const std::string& text,
                               const SearchConstraints& defaults = {});

enum class Termination { Answered, MaxRounds, ProtocolFailure };

std::string termination_name(Termination t);
Termination termination_from_name(const std::string& name);

struct TrajectoryStep {
  std::string think;
  std::string raw_output;       // the model turn exactly as received
  AgentAction action;
  std::string observation;      // empty only for Answer steps
  std::vector<FactId> result_fact_ids;  // facts surfaced by a Search step
  std::int64_t wall_ms = 0;
};

// One full episode transcript: the auditable evidence chain for a
// prediction.
struct Trajectory {
  std::string question_id;
  std::vector<TrajectoryStep> steps;
  std::optional<std::vector<std::string>> final_answer;
  Termination termination = Termination::ProtocolFailure;
  int rounds_used = 0;
  std::uint64_t cost_chars = 0;  // raw output + observation bytes
};

enum class ObservationRole { Tool, User };

struct EpisodeConfig {
  int t_max = 20;
  std::vector<std::string> demonstrations;  // experience texts, library order
  DecodingConfig decoding;
  int malformed_retry_budget = 2;
  std::size_t observation_byte_cap = 4096;
  ObservationRole observation_role = ObservationRole::Tool;
  // Scripted runs record wall_ms = 0 so repeated runs are byte-identical.
  bool deterministic_timing = false;
  SearchConstraints search_defaults;
  // Gateway conversation identity; defaults to the question id. Samplers
  // override it (e.g. "q7#2") so concurrent episodes of one question keep
  // separate scripted cursors.
  std::string conversation_id;
};

// Everything the Search tool needs at dispatch time.
struct SearchContext {
  const TkgStore* store = nullptr;
  const FactIndex* index = nullptr;
  Embedder* embedder = nullptr;
};

// Deterministic prompt assembly: one system message (instructions +
// delimited demonstration blocks, library order), then the question as the
// sole user message.
std::vector<ChatMessage> render_prompt(
    const std::string& question, const std::vector<std::string>& demonstrations);

// Runs one question as an iterative episode until Answer, the round cap, or
// malformed-retry exhaustion. Endpoint failures propagate to the caller.
Trajectory run_episode(const std::string& question_id,
                       const std::string& question, const EpisodeConfig& cfg,
                       const SearchContext& ctx, ChatGateway& gateway);

// Re-runs the recorded model outputs through parse + dispatch and returns
// true iff every observation (and the termination) reproduces byte-equally.
bool replay_matches(const Trajectory& t, const EpisodeConfig& cfg,
                    const SearchContext& ctx, std::string* first_divergence = nullptr);

// JSONL trajectory log (schema_version 1), one complete trajectory per line.
std::string trajectory_to_json(const Trajectory& t);
Trajectory trajectory_from_json(const std::string& line);
void append_trajectory(const std::string& path, const Trajectory& t);
std::vector<Trajectory> load_trajectories(const std::string& path);

}  // namespace tkgqa
