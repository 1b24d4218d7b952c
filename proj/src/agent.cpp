#include "tkgqa/agent.hpp"

#include <chrono>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tkgqa/assets_gen.hpp"
#include "tkgqa/errors.hpp"
#include "tkgqa/util.hpp"

namespace tkgqa {

namespace {

// Extracts the content of the first <tag>...</tag> block at or after `from`.
// Returns npos if none; otherwise sets [content_begin, content_end) and
// returns the position of the opening tag.
std::size_t find_block(const std::string& text, const std::string& tag,
                       std::size_t from, std::size_t& content_begin,
                       std::size_t& content_end) {
  const std::string open = "<" + tag + ">";
  const std::string close = "</" + tag + ">";
  const std::size_t o = text.find(open, from);
  if (o == std::string::npos) return std::string::npos;
  const std::size_t c = text.find(close, o + open.size());
  if (c == std::string::npos) return std::string::npos;
  content_begin = o + open.size();
  content_end = c;
  return o;
}

std::vector<std::string> split_answers(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& part : split(text, '|')) {
    auto t = trim(part);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

AgentAction parse_agent_output(const std::string& text,
                               const SearchConstraints& defaults) {
  AgentAction action;

  std::size_t tb = 0, te = 0;
  if (find_block(text, "think", 0, tb, te) != std::string::npos) {
    action.think_text = trim(text.substr(tb, te - tb));
  }

  // Walk action blocks in positional order; the first well-formed one wins.
  std::string first_problem;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t sb = 0, se = 0, ab = 0, ae = 0;
    const std::size_t s_at = find_block(text, "search", pos, sb, se);
    const std::size_t a_at = find_block(text, "answer", pos, ab, ae);
    if (s_at == std::string::npos && a_at == std::string::npos) break;

    if (a_at == std::string::npos || (s_at != std::string::npos && s_at < a_at)) {
      const std::string payload = trim(text.substr(sb, se - sb));
      std::string diagnostic;
      auto call = parse_tool_call(payload, defaults, diagnostic);
      if (call) {
        action.kind = ActionKind::Search;
        action.search_payload = std::move(call);
        action.raw_search_json = payload;
        return action;
      }
      if (first_problem.empty()) first_problem = diagnostic;
      pos = se;
    } else {
      action.kind = ActionKind::Answer;
      action.answer_text = trim(text.substr(ab, ae - ab));
      action.answers = split_answers(*action.answer_text);
      return action;
    }
  }

  action.kind = ActionKind::Malformed;
  action.diagnostic = first_problem.empty()
                          ? "no <search> or <answer> block found"
                          : first_problem;
  return action;
}

std::string termination_name(Termination t) {
  switch (t) {
    case Termination::Answered: return "answered";
    case Termination::MaxRounds: return "max_rounds";
    case Termination::ProtocolFailure: return "protocol_failure";
  }
  return "protocol_failure";
}

Termination termination_from_name(const std::string& name) {
  if (name == "answered") return Termination::Answered;
  if (name == "max_rounds") return Termination::MaxRounds;
  if (name == "protocol_failure") return Termination::ProtocolFailure;
  throw IoError("unknown termination: " + name);
}

std::vector<ChatMessage> render_prompt(
    const std::string& question,
    const std::vector<std::string>& demonstrations) {
  std::string system = assets::kSystemPromptV1;
  if (!demonstrations.empty()) {
    system += "\nWorked examples from past successful sessions:\n";
    for (std::size_t i = 0; i < demonstrations.size(); ++i) {
      system += "\n--- demonstration " + std::to_string(i + 1) + " ---\n";
      system += demonstrations[i];
      system += "\n--- end demonstration " + std::to_string(i + 1) + " ---\n";
    }
  }
  return {{Role::System, std::move(system)}, {Role::User, question}};
}

namespace {

std::string truncate_observation(std::string text, std::size_t byte_cap) {
  if (text.size() <= byte_cap) return text;
  text.resize(byte_cap);
  text += " [truncated]";
  return text;
}

std::string corrective_observation(const std::string& diagnostic) {
  return "Your previous reply was not a valid action (" + diagnostic +
         "). Reply with optional <think>...</think> followed by exactly one "
         "of <search>{...}</search> or <answer>...</answer>.";
}

struct DispatchResult {
  std::string observation;
  std::vector<FactId> fact_ids;
};

DispatchResult dispatch_search(const ToolCall& call, const SearchContext& ctx,
                               std::size_t byte_cap) {
  const SearchResult result =
      search(call.query, call.constraints, *ctx.store, *ctx.index, *ctx.embedder);
  DispatchResult out;
  out.observation = truncate_observation(render_observation(result), byte_cap);
  out.fact_ids.reserve(result.entries.size());
  for (const auto& e : result.entries) out.fact_ids.push_back(e.fact_id);
  return out;
}

}  // namespace

Trajectory run_episode(const std::string& question_id,
                       const std::string& question, const EpisodeConfig& cfg,
                       const SearchContext& ctx, ChatGateway& gateway) {
  if (cfg.t_max < 1) throw UsageError("t_max must be >= 1");

  Trajectory traj;
  traj.question_id = question_id;
  traj.termination = Termination::MaxRounds;

  auto messages = render_prompt(question, cfg.demonstrations);
  const Role obs_role =
      cfg.observation_role == ObservationRole::Tool ? Role::Tool : Role::User;
  const std::string conversation_id =
      cfg.conversation_id.empty() ? question_id : cfg.conversation_id;
  int malformed_count = 0;

  for (int round = 1; round <= cfg.t_max; ++round) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string reply = gateway.chat(messages, cfg.decoding, conversation_id);
    traj.rounds_used = round;

    TrajectoryStep step;
    step.raw_output = reply;
    step.action = parse_agent_output(reply, cfg.search_defaults);
    step.think = step.action.think_text;

    bool stop = false;
    switch (step.action.kind) {
      case ActionKind::Answer:
        traj.final_answer = step.action.answers;
        traj.termination = Termination::Answered;
        stop = true;
        break;
      case ActionKind::Search: {
        auto d = dispatch_search(*step.action.search_payload, ctx,
                                 cfg.observation_byte_cap);
        step.observation = std::move(d.observation);
        step.result_fact_ids = std::move(d.fact_ids);
        break;
      }
      case ActionKind::Malformed:
        ++malformed_count;
        step.observation = corrective_observation(step.action.diagnostic);
        if (malformed_count > cfg.malformed_retry_budget) {
          traj.termination = Termination::ProtocolFailure;
          stop = true;
        }
        break;
    }

    if (!cfg.deterministic_timing) {
      step.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    }
    traj.cost_chars += step.raw_output.size() + step.observation.size();

    const std::string observation = step.observation;
    traj.steps.push_back(std::move(step));
    if (stop) break;

    messages.push_back({Role::Assistant, reply});
    messages.push_back({obs_role, observation});
  }

  return traj;
}

bool replay_matches(const Trajectory& t, const EpisodeConfig& cfg,
                    const SearchContext& ctx, std::string* first_divergence) {
  const auto fail = [&](const std::string& why) {
    if (first_divergence) *first_divergence = why;
    return false;
  };
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const auto& step = t.steps[i];
    const AgentAction action =
        parse_agent_output(step.raw_output, cfg.search_defaults);
    std::string expected_obs;
    std::vector<FactId> expected_ids;
    switch (action.kind) {
      case ActionKind::Answer:
        break;  // answer steps carry no observation
      case ActionKind::Search: {
        auto d = dispatch_search(*action.search_payload, ctx,
                                 cfg.observation_byte_cap);
        expected_obs = std::move(d.observation);
        expected_ids = std::move(d.fact_ids);
        break;
      }
      case ActionKind::Malformed:
        expected_obs = corrective_observation(action.diagnostic);
        break;
    }
    if (expected_obs != step.observation) {
      return fail("step " + std::to_string(i) + ": observation diverges");
    }
    if (expected_ids != step.result_fact_ids) {
      return fail("step " + std::to_string(i) + ": result fact ids diverge");
    }
  }
  return true;
}

// --- trajectory JSONL -----------------------------------------------------

namespace {
constexpr int kTrajectorySchemaVersion = 1;
}

std::string trajectory_to_json(const Trajectory& t) {
  nlohmann::json j;
  j["schema_version"] = kTrajectorySchemaVersion;
  j["question_id"] = t.question_id;
  auto& steps = j["steps"] = nlohmann::json::array();
  for (const auto& s : t.steps) {
    nlohmann::json js;
    js["think"] = s.think;
    js["raw_output"] = s.raw_output;
    nlohmann::json ja;
    switch (s.action.kind) {
      case ActionKind::Search:
        ja["kind"] = "search";
        ja["payload"] = s.action.raw_search_json;
        break;
      case ActionKind::Answer:
        ja["kind"] = "answer";
        ja["answer_text"] = s.action.answer_text.value_or("");
        break;
      case ActionKind::Malformed:
        ja["kind"] = "malformed";
        ja["diagnostic"] = s.action.diagnostic;
        break;
    }
    js["action"] = std::move(ja);
    js["observation"] = s.observation;
    js["result_fact_ids"] = s.result_fact_ids;
    js["wall_ms"] = s.wall_ms;
    steps.push_back(std::move(js));
  }
  if (t.final_answer) {
    j["final_answer"] = *t.final_answer;
  } else {
    j["final_answer"] = nullptr;
  }
  j["termination"] = termination_name(t.termination);
  j["rounds_used"] = t.rounds_used;
  j["cost_chars"] = t.cost_chars;
  return j.dump();
}

Trajectory trajectory_from_json(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad trajectory record: ") + e.what());
  }
  if (j.value("schema_version", 0) != kTrajectorySchemaVersion) {
    throw IoError("unsupported trajectory schema version");
  }
  Trajectory t;
  t.question_id = j.at("question_id").get<std::string>();
  for (const auto& js : j.at("steps")) {
    TrajectoryStep s;
    s.think = js.value("think", "");
    s.raw_output = js.value("raw_output", "");
    const auto& ja = js.at("action");
    const auto kind = ja.at("kind").get<std::string>();
    if (kind == "search") {
      s.action.kind = ActionKind::Search;
      s.action.raw_search_json = ja.value("payload", "");
    } else if (kind == "answer") {
      s.action.kind = ActionKind::Answer;
      s.action.answer_text = ja.value("answer_text", "");
      s.action.answers = split_answers(*s.action.answer_text);
    } else {
      s.action.kind = ActionKind::Malformed;
      s.action.diagnostic = ja.value("diagnostic", "");
    }
    s.action.think_text = s.think;
    s.observation = js.value("observation", "");
    s.result_fact_ids = js.value("result_fact_ids", std::vector<FactId>{});
    s.wall_ms = js.value("wall_ms", static_cast<std::int64_t>(0));
    t.steps.push_back(std::move(s));
  }
  if (j.contains("final_answer") && !j["final_answer"].is_null()) {
    t.final_answer = j["final_answer"].get<std::vector<std::string>>();
  }
  t.termination = termination_from_name(j.at("termination").get<std::string>());
  t.rounds_used = j.value("rounds_used", 0);
  t.cost_chars = j.value("cost_chars", static_cast<std::uint64_t>(0));
  return t;
}

void append_trajectory(const std::string& path, const Trajectory& t) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot append to trajectory log: " + path);
  out << trajectory_to_json(t) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

std::vector<Trajectory> load_trajectories(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trajectory log: " + path);
  std::vector<Trajectory> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    out.push_back(trajectory_from_json(line));
  }
  return out;
}

}  // namespace tkgqa
