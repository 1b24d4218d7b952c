#pragma once

#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tkgqa/http.hpp"

namespace tkgqa {

enum class Role { System, User, Assistant, Tool };

struct ChatMessage {
  Role role = Role::User;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

std::string role_name(Role r);

struct DecodingConfig {
  double temperature = 1.0;
  int max_output_tokens = 4096;
  std::optional<std::int64_t> seed;
};

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  bool estimated = false;  // endpoint did not report usage; chars/4 heuristic
};

struct UsageTally {
  std::int64_t calls = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

// Uniform chat-completion interface. Implementations must be safe for
// concurrent callers. conversation_id identifies one episode so scripted
// cursors and traces never interleave across concurrent episodes.
class ChatGateway {
 public:
  virtual ~ChatGateway() = default;
  virtual std::string chat(const std::vector<ChatMessage>& messages,
                           const DecodingConfig& cfg,
                           const std::string& conversation_id = "") = 0;
  virtual UsageTally usage() const { return {}; }
  // True when replies ignore decoding randomness (scripted responders).
  virtual bool deterministic() const { return false; }
};

// Appends {ts, model, messages, response, usage} JSONL records.
class TraceWriter {
 public:
  explicit TraceWriter(std::string path);
  void record(const std::string& model,
              const std::vector<ChatMessage>& messages,
              const std::string& response, const Usage& usage);

 private:
  std::string path_;
  std::mutex mu_;
};

// One step of a scripted conversation. `match` is a substring expected in
// the last user/tool message ("*" matches anything); a mismatch yields a
// deterministic diagnostic response rather than the scripted text, so test
// scripts double as transcript assertions.
struct ScriptStep {
  std::string match = "*";
  std::string response;
};

// A script routed to conversations whose conversation id, system message or
// first user message contains `match` ("*" = default route). Routes are
// tried in registration order; first hit wins.
struct ScriptRoute {
  std::string match = "*";
  std::vector<ScriptStep> steps;
};

// Deterministic offline responder. The cursor of a conversation is implied
// by its transcript (the number of assistant messages already present), so
// replays are bit-identical and concurrent episodes cannot interleave.
// An exhausted script yields `terminal_response`, never a hang.
class ScriptedResponder : public ChatGateway {
 public:
  ScriptedResponder() = default;
  explicit ScriptedResponder(std::vector<ScriptStep> steps);
  ScriptedResponder(ScriptedResponder&& other) noexcept
      : routes_(std::move(other.routes_)),
        terminal_(std::move(other.terminal_)),
        tally_(other.tally_) {}

  void add_route(ScriptRoute route);
  void set_terminal_response(std::string text);
  const std::string& terminal_response() const { return terminal_; }

  std::string chat(const std::vector<ChatMessage>& messages,
                   const DecodingConfig& cfg,
                   const std::string& conversation_id = "") override;
  UsageTally usage() const override;
  bool deterministic() const override { return true; }

  // Loads routes from a JSON file:
  // {"terminal": "...", "routes": [{"match": "...",
  //   "steps": [{"match": "...", "response": "..."}]}]}
  static ScriptedResponder from_file(const std::string& path);

 private:
  std::vector<ScriptRoute> routes_;
  std::string terminal_ = "[script exhausted]";
  mutable std::mutex mu_;
  UsageTally tally_;
};

// Chat-completions client over HTTP POST with bearer-token auth, bounded
// retries and optional tracing. A max-in-flight counter caps parallelism.
class HttpChatGateway : public ChatGateway {
 public:
  struct Config {
    std::string endpoint;            // e.g. "https://api.example.com"
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string api_key_env = "LLM_API_KEY";
    int max_in_flight = 8;
    RetryPolicy retry;
    std::string trace_path;          // empty = no tracing
  };

  explicit HttpChatGateway(Config cfg);
  HttpChatGateway(Config cfg, std::unique_ptr<HttpTransport> transport);
  ~HttpChatGateway() override;

  std::string chat(const std::vector<ChatMessage>& messages,
                   const DecodingConfig& cfg,
                   const std::string& conversation_id = "") override;
  UsageTally usage() const override;

 private:
  Config cfg_;
  std::unique_ptr<HttpTransport> transport_;
  std::unique_ptr<TraceWriter> trace_;
  mutable std::mutex mu_;
  UsageTally tally_;
  // in-flight gate
  std::mutex gate_mu_;
  std::condition_variable gate_cv_;
  int in_flight_ = 0;
};

// Character-count token estimate used when the endpoint omits usage.
std::int64_t estimate_tokens(const std::string& text);

}  // namespace tkgqa
