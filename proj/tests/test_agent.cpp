#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "tkgqa/agent.hpp"
#include "tkgqa/errors.hpp"

using namespace tkgqa;

namespace {

struct AgentFixture {
  TkgStore store;
  HashEmbedder embedder{16, 42};
  FactIndex index;

  AgentFixture()
      : store(TkgStore::from_rows({
            {"Abdul_Hamid", "Make_statement", "Ranil_Wickremesinghe", "2010-03-05"},
            {"Abdul_Hamid", "met", "Ranil_Wickremesinghe", "2005-06-10"},
            {"France", "hosted", "Summit", "2005"},
            {"Germany", "hosted", "Summit", "2006-01"},
        })),
        index(build_index(store, embedder)) {}

  SearchContext ctx() { return {&store, &index, &embedder}; }
};

const char* kSearch2005 =
    "<think>need 2005 facts</think>"
    "<search>{\"query\":\"X met Y\",\"time_start\":\"2005\",\"time_end\":\"2005\"}</search>";

}  // namespace

TEST_CASE("parse_agent_output handles the tagged grammar") {
  const auto a = parse_agent_output(kSearch2005);
  REQUIRE(a.kind == ActionKind::Search);
  CHECK(a.think_text == "need 2005 facts");
  REQUIRE(a.search_payload.has_value());
  CHECK(a.search_payload->query == "X met Y");
  REQUIRE(a.search_payload->constraints.time_window.has_value());

  const auto b = parse_agent_output("<answer>Abdul Hamid | Ranil Wickremesinghe</answer>");
  REQUIRE(b.kind == ActionKind::Answer);
  REQUIRE(b.answers.size() == 2);
  CHECK(b.answers[0] == "Abdul Hamid");
  CHECK(b.answers[1] == "Ranil Wickremesinghe");

  const auto c = parse_agent_output("I think the answer is Paris");
  CHECK(c.kind == ActionKind::Malformed);
  CHECK(!c.diagnostic.empty());
}

TEST_CASE("parse_agent_output: first well-formed block wins") {
  const auto a = parse_agent_output(
      "<search>{\"query\":\"one\"}</search><answer>two</answer>");
  CHECK(a.kind == ActionKind::Search);
  CHECK(a.search_payload->query == "one");

  const auto b = parse_agent_output(
      "<answer>first</answer><search>{\"query\":\"later\"}</search>");
  CHECK(b.kind == ActionKind::Answer);
  CHECK(b.answers == std::vector<std::string>{"first"});

  // A broken search block is skipped in favor of a later well-formed answer.
  const auto c = parse_agent_output(
      "<search>{broken json</search><answer>fallback</answer>");
  CHECK(c.kind == ActionKind::Answer);
  CHECK(c.answers == std::vector<std::string>{"fallback"});

  // Broken search with no recovery surfaces its diagnostic.
  const auto d = parse_agent_output("<search>{broken json</search>");
  CHECK(d.kind == ActionKind::Malformed);
  CHECK(d.diagnostic.find("JSON") != std::string::npos);
}

TEST_CASE("parse_agent_output tolerates surrounding prose") {
  const auto a = parse_agent_output(
      "Sure, let me search.\n<think>plan</think>\nHere goes:\n"
      "<search>{\"query\":\"q\"}</search>\nThanks!");
  CHECK(a.kind == ActionKind::Search);
  CHECK(a.think_text == "plan");
}

TEST_CASE("parse_agent_output never throws on random input") {
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<int> len(0, 200);
  std::uniform_int_distribution<int> byte(0, 255);
  const std::vector<std::string> fragments = {
      "<think>", "</think>", "<search>", "</search>", "<answer>", "</answer>",
      "{\"query\":", "\"}", "|", "{", "}"};
  std::uniform_int_distribution<std::size_t> frag(0, fragments.size() - 1);
  std::uniform_int_distribution<int> mode(0, 2);

  for (int i = 0; i < 10000; ++i) {
    std::string s;
    const int n = len(rng);
    for (int j = 0; j < n; ++j) {
      const int m = mode(rng);
      if (m == 0) {
        s += fragments[frag(rng)];
      } else {
        s.push_back(static_cast<char>(byte(rng)));
      }
    }
    const auto action = parse_agent_output(s);
    CHECK((action.kind == ActionKind::Search || action.kind == ActionKind::Answer ||
           action.kind == ActionKind::Malformed));
  }
}

TEST_CASE("render_prompt is deterministic with ordered demonstrations") {
  const auto zero = render_prompt("Who met X?", {});
  REQUIRE(zero.size() == 2);
  CHECK(zero[0].role == Role::System);
  CHECK(zero[1].role == Role::User);
  CHECK(zero[1].content == "Who met X?");
  CHECK(zero[0].content.find("demonstration") == std::string::npos);

  const std::vector<std::string> demos{"lesson A", "lesson B", "lesson C"};
  const auto shot = render_prompt("Who met X?", demos);
  const auto& sys = shot[0].content;
  const auto pa = sys.find("lesson A");
  const auto pb = sys.find("lesson B");
  const auto pc = sys.find("lesson C");
  REQUIRE(pa != std::string::npos);
  REQUIRE(pb != std::string::npos);
  REQUIRE(pc != std::string::npos);
  CHECK(pa < pb);
  CHECK(pb < pc);
  CHECK(sys.find("--- demonstration 3 ---") != std::string::npos);

  CHECK(render_prompt("Who met X?", demos) == shot);  // byte-identical
}

TEST_CASE("run_episode: search then answer terminates Answered") {
  AgentFixture f;
  ScriptedResponder gateway(std::vector<ScriptStep>{
      {"*", kSearch2005},
      {"candidates=", "<think>found it</think><answer>France</answer>"}});
  EpisodeConfig cfg;
  cfg.t_max = 20;
  cfg.deterministic_timing = true;

  const auto traj = run_episode("q1", "Who hosted the summit in 2005?", cfg,
                                f.ctx(), gateway);
  CHECK(traj.termination == Termination::Answered);
  CHECK(traj.rounds_used == 2);
  REQUIRE(traj.steps.size() == 2);
  CHECK(traj.steps[0].action.kind == ActionKind::Search);
  CHECK(!traj.steps[0].observation.empty());
  // 2005 window: facts 1 (2005-06-10) and 2 (2005).
  CHECK(traj.steps[0].result_fact_ids == std::vector<FactId>{1, 2});
  REQUIRE(traj.final_answer.has_value());
  CHECK(*traj.final_answer == std::vector<std::string>{"France"});
  CHECK(traj.steps[1].wall_ms == 0);
}

TEST_CASE("run_episode: endless searching hits the round cap") {
  AgentFixture f;
  ScriptedResponder gateway;  // empty scripts; terminal drives the loop
  gateway.set_terminal_response(kSearch2005);
  EpisodeConfig cfg;
  cfg.t_max = 3;
  cfg.deterministic_timing = true;

  const auto traj = run_episode("q1", "loop", cfg, f.ctx(), gateway);
  CHECK(traj.termination == Termination::MaxRounds);
  CHECK(traj.rounds_used == 3);
  CHECK(traj.steps.size() == 3);
  CHECK_FALSE(traj.final_answer.has_value());
}

TEST_CASE("run_episode: persistent garbage exhausts the retry budget") {
  AgentFixture f;
  ScriptedResponder gateway;
  gateway.set_terminal_response("complete nonsense");
  EpisodeConfig cfg;
  cfg.t_max = 20;
  cfg.malformed_retry_budget = 2;
  cfg.deterministic_timing = true;

  const auto traj = run_episode("q1", "garbage", cfg, f.ctx(), gateway);
  CHECK(traj.termination == Termination::ProtocolFailure);
  CHECK(traj.rounds_used == 3);  // budget 2 retries + the failing turn
  for (const auto& s : traj.steps) {
    CHECK(s.action.kind == ActionKind::Malformed);
    CHECK(s.observation.find("not a valid action") != std::string::npos);
  }
}

TEST_CASE("run_episode: malformed turns are corrected and counted") {
  AgentFixture f;
  ScriptedResponder gateway(std::vector<ScriptStep>{
      {"*", "oops not an action"},
      {"not a valid action", "<answer>recovered</answer>"}});
  EpisodeConfig cfg;
  cfg.t_max = 5;
  cfg.malformed_retry_budget = 2;
  cfg.deterministic_timing = true;

  const auto traj = run_episode("q1", "recover", cfg, f.ctx(), gateway);
  CHECK(traj.termination == Termination::Answered);
  CHECK(traj.rounds_used == 2);
  CHECK(traj.steps[0].action.kind == ActionKind::Malformed);
  CHECK(traj.steps[1].action.kind == ActionKind::Answer);
}

TEST_CASE("run_episode truncates oversized observations visibly") {
  AgentFixture f;
  ScriptedResponder gateway(std::vector<ScriptStep>{
      {"*", "<search>{\"query\":\"anything\",\"limit\":4}</search>"},
      {"*", "<answer>x</answer>"}});
  EpisodeConfig cfg;
  cfg.observation_byte_cap = 40;
  cfg.deterministic_timing = true;

  const auto traj = run_episode("q1", "truncate", cfg, f.ctx(), gateway);
  REQUIRE(traj.steps.size() == 2);
  const auto& obs = traj.steps[0].observation;
  CHECK(obs.size() == 40 + std::string(" [truncated]").size());
  CHECK(obs.rfind("[truncated]") != std::string::npos);
}

TEST_CASE("round bound holds for adversarial responders at several caps") {
  AgentFixture f;
  for (int t_max : {1, 3, 8, 20}) {
    for (const char* reply : {kSearch2005, "garbage forever"}) {
      ScriptedResponder gateway;
      gateway.set_terminal_response(reply);
      EpisodeConfig cfg;
      cfg.t_max = t_max;
      cfg.deterministic_timing = true;
      const auto traj = run_episode("q", "adversarial", cfg, f.ctx(), gateway);
      CHECK(traj.rounds_used <= t_max);
      CHECK(static_cast<int>(traj.steps.size()) <= t_max);
      CHECK(traj.termination != Termination::Answered);
    }
  }
}

TEST_CASE("replay reproduces recorded observation sequences") {
  AgentFixture f;
  ScriptedResponder gateway(std::vector<ScriptStep>{
      {"*", kSearch2005},
      {"*", "<search>{\"query\":\"summit hosts\",\"sort\":\"time\"}</search>"},
      {"*", "<answer>Germany</answer>"}});
  EpisodeConfig cfg;
  cfg.deterministic_timing = true;

  const auto traj = run_episode("q1", "replay me", cfg, f.ctx(), gateway);
  REQUIRE(traj.steps.size() == 3);
  auto ctx = f.ctx();
  std::string why;
  CHECK(replay_matches(traj, cfg, ctx, &why));

  // Tampered observations are detected.
  auto tampered = traj;
  tampered.steps[1].observation += " edited";
  CHECK_FALSE(replay_matches(tampered, cfg, ctx, &why));
  CHECK(why.find("step 1") != std::string::npos);

  auto tampered_ids = traj;
  tampered_ids.steps[0].result_fact_ids.push_back(3);
  CHECK_FALSE(replay_matches(tampered_ids, cfg, ctx, &why));
}

TEST_CASE("trajectories round-trip through JSONL") {
  testing::TempDir dir;
  AgentFixture f;
  ScriptedResponder gateway(std::vector<ScriptStep>{
      {"*", kSearch2005}, {"*", "<answer>France | Germany</answer>"}});
  EpisodeConfig cfg;
  cfg.deterministic_timing = true;
  const auto traj = run_episode("q7", "round trip", cfg, f.ctx(), gateway);

  const auto path = dir.file("traj.jsonl");
  append_trajectory(path, traj);
  append_trajectory(path, traj);
  const auto loaded = load_trajectories(path);
  REQUIRE(loaded.size() == 2);
  const auto& t = loaded[0];
  CHECK(t.question_id == traj.question_id);
  CHECK(t.rounds_used == traj.rounds_used);
  CHECK(t.termination == traj.termination);
  CHECK(t.final_answer == traj.final_answer);
  CHECK(t.cost_chars == traj.cost_chars);
  REQUIRE(t.steps.size() == traj.steps.size());
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    CHECK(t.steps[i].raw_output == traj.steps[i].raw_output);
    CHECK(t.steps[i].observation == traj.steps[i].observation);
    CHECK(t.steps[i].result_fact_ids == traj.steps[i].result_fact_ids);
    CHECK(t.steps[i].action.kind == traj.steps[i].action.kind);
  }
  // Serialization itself is deterministic.
  CHECK(trajectory_to_json(loaded[0]) == trajectory_to_json(loaded[1]));

  // Replay works on reloaded trajectories too.
  auto ctx = f.ctx();
  CHECK(replay_matches(t, cfg, ctx));
}

TEST_CASE("answer edge cases: empty and whitespace-only answers") {
  const auto empty = parse_agent_output("<answer></answer>");
  CHECK(empty.kind == ActionKind::Answer);
  CHECK(empty.answers.empty());

  const auto spaced = parse_agent_output("<answer> a |  | b </answer>");
  CHECK(spaced.answers == std::vector<std::string>{"a", "b"});
}
