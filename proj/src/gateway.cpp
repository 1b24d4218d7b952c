#include "tkgqa/gateway.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tkgqa/errors.hpp"
#include "tkgqa/util.hpp"

namespace tkgqa {

std::string role_name(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    case Role::Tool: return "tool";
  }
  return "user";
}

std::int64_t estimate_tokens(const std::string& text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

// --- TraceWriter ---------------------------------------------------------

TraceWriter::TraceWriter(std::string path) : path_(std::move(path)) {}

void TraceWriter::record(const std::string& model,
                         const std::vector<ChatMessage>& messages,
                         const std::string& response, const Usage& usage) {
  nlohmann::json rec;
  rec["ts"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::system_clock::now().time_since_epoch())
                  .count();
  rec["model"] = model;
  auto& msgs = rec["messages"] = nlohmann::json::array();
  for (const auto& m : messages) {
    msgs.push_back({{"role", role_name(m.role)}, {"content", m.content}});
  }
  rec["response"] = response;
  rec["usage"] = {{"prompt_tokens", usage.prompt_tokens},
                  {"completion_tokens", usage.completion_tokens},
                  {"estimated", usage.estimated}};
  std::lock_guard lock(mu_);
  std::ofstream out(path_, std::ios::app);
  if (out) out << rec.dump() << "\n";
}

// --- ScriptedResponder ----------------------------------------------------

ScriptedResponder::ScriptedResponder(std::vector<ScriptStep> steps) {
  add_route({"*", std::move(steps)});
}

void ScriptedResponder::add_route(ScriptRoute route) {
  routes_.push_back(std::move(route));
}

void ScriptedResponder::set_terminal_response(std::string text) {
  terminal_ = std::move(text);
}

namespace {

bool pattern_hits(const std::string& pattern, const std::string& haystack) {
  return pattern == "*" || haystack.find(pattern) != std::string::npos;
}

const ChatMessage* last_user_or_tool(const std::vector<ChatMessage>& messages) {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == Role::User || it->role == Role::Tool) return &*it;
  }
  return nullptr;
}

}  // namespace

std::string ScriptedResponder::chat(const std::vector<ChatMessage>& messages,
                                    const DecodingConfig& cfg,
                                    const std::string& conversation_id) {
  (void)cfg;
  if (messages.empty()) {
    throw PreconditionViolation("chat called with an empty message list");
  }

  // Route selection: conversation id, then any message content.
  const ScriptRoute* route = nullptr;
  for (const auto& r : routes_) {
    bool hit = pattern_hits(r.match, conversation_id);
    for (const auto& m : messages) {
      if (hit) break;
      hit = pattern_hits(r.match, m.content);
    }
    if (hit) {
      route = &r;
      break;
    }
  }

  // Cursor = number of assistant turns already in this conversation.
  std::size_t cursor = 0;
  for (const auto& m : messages) {
    if (m.role == Role::Assistant) ++cursor;
  }

  std::string reply;
  if (route == nullptr || cursor >= route->steps.size()) {
    reply = terminal_;
  } else {
    const ScriptStep& step = route->steps[cursor];
    const ChatMessage* probe = last_user_or_tool(messages);
    if (probe == nullptr || !pattern_hits(step.match, probe->content)) {
      reply = "[script mismatch at step " + std::to_string(cursor) +
              ": expected \"" + step.match + "\"]";
    } else {
      reply = step.response;
    }
  }

  std::lock_guard lock(mu_);
  tally_.calls += 1;
  for (const auto& m : messages) tally_.prompt_tokens += estimate_tokens(m.content);
  tally_.completion_tokens += estimate_tokens(reply);
  return reply;
}

UsageTally ScriptedResponder::usage() const {
  std::lock_guard lock(mu_);
  return tally_;
}

ScriptedResponder ScriptedResponder::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open script file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad script file " + path + ": " + e.what());
  }
  ScriptedResponder responder;
  if (j.contains("terminal")) {
    responder.set_terminal_response(j["terminal"].get<std::string>());
  }
  for (const auto& r : j.value("routes", nlohmann::json::array())) {
    ScriptRoute route;
    route.match = r.value("match", "*");
    for (const auto& s : r.value("steps", nlohmann::json::array())) {
      ScriptStep step;
      step.match = s.value("match", "*");
      step.response = s.value("response", "");
      route.steps.push_back(std::move(step));
    }
    responder.add_route(std::move(route));
  }
  return responder;
}

// --- HttpChatGateway ------------------------------------------------------

HttpChatGateway::HttpChatGateway(Config cfg)
    : HttpChatGateway(std::move(cfg), nullptr) {
  transport_ = make_httplib_transport(cfg_.endpoint);
}

HttpChatGateway::HttpChatGateway(Config cfg,
                                 std::unique_ptr<HttpTransport> transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)) {
  if (!cfg_.trace_path.empty()) {
    trace_ = std::make_unique<TraceWriter>(cfg_.trace_path);
  }
}

HttpChatGateway::~HttpChatGateway() = default;

std::string HttpChatGateway::chat(const std::vector<ChatMessage>& messages,
                                  const DecodingConfig& cfg,
                                  const std::string& conversation_id) {
  (void)conversation_id;
  if (messages.empty()) {
    throw PreconditionViolation("chat called with an empty message list");
  }

  nlohmann::json body;
  body["model"] = cfg_.model;
  auto& msgs = body["messages"] = nlohmann::json::array();
  for (const auto& m : messages) {
    msgs.push_back({{"role", role_name(m.role)}, {"content", m.content}});
  }
  body["temperature"] = cfg.temperature;
  body["max_tokens"] = cfg.max_output_tokens;
  if (cfg.seed) body["seed"] = *cfg.seed;

  std::vector<std::pair<std::string, std::string>> headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str())) {
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }

  const std::string payload = body.dump();

  {
    std::unique_lock lock(gate_mu_);
    gate_cv_.wait(lock, [&] { return in_flight_ < cfg_.max_in_flight; });
    ++in_flight_;
  }
  HttpResponse res = retry_post(cfg_.retry, [&] {
    return transport_->post_json(cfg_.path, payload, headers);
  });
  {
    std::lock_guard lock(gate_mu_);
    --in_flight_;
  }
  gate_cv_.notify_one();

  if (res.status == 0) {
    throw EndpointUnavailable("chat endpoint unreachable: " + res.error);
  }
  if (res.status == 429) {
    throw RateLimited("chat endpoint rate limited after retries: " + res.body);
  }
  if (res.status == 400 || res.status == 413) {
    // Context-overflow reports arrive as 4xx with a coded error body.
    const auto lower = to_lower(res.body);
    if (lower.find("context_length") != std::string::npos ||
        lower.find("context length") != std::string::npos ||
        lower.find("too long") != std::string::npos) {
      throw ContextTooLong("chat endpoint reported context overflow: " + res.body);
    }
  }
  if (res.status != 200) {
    throw EndpointUnavailable("chat endpoint returned HTTP " +
                              std::to_string(res.status) + ": " + res.body);
  }

  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(res.body);
  } catch (const nlohmann::json::exception& e) {
    throw EndpointUnavailable(std::string("bad chat response: ") + e.what());
  }
  std::string content;
  try {
    content = reply.at("choices").at(0).at("message").at("content")
                  .get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw EndpointUnavailable("chat response missing choices[0].message.content");
  }

  Usage usage;
  if (reply.contains("usage") && reply["usage"].is_object()) {
    usage.prompt_tokens = reply["usage"].value("prompt_tokens", 0);
    usage.completion_tokens = reply["usage"].value("completion_tokens", 0);
  } else {
    usage.estimated = true;
    for (const auto& m : messages) usage.prompt_tokens += estimate_tokens(m.content);
    usage.completion_tokens = estimate_tokens(content);
  }

  {
    std::lock_guard lock(mu_);
    tally_.calls += 1;
    tally_.prompt_tokens += usage.prompt_tokens;
    tally_.completion_tokens += usage.completion_tokens;
  }
  if (trace_) trace_->record(cfg_.model, messages, content, usage);
  return content;
}

UsageTally HttpChatGateway::usage() const {
  std::lock_guard lock(mu_);
  return tally_;
}

}  // namespace tkgqa
