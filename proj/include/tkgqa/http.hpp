#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace tkgqa {

struct HttpResponse {
  int status = 0;          // 0 = transport failure (no HTTP status)
  std::string body;
  std::string error;       // transport-level diagnostic when status == 0
};

// Minimal JSON-over-POST transport. Tests substitute fakes; production
// uses the cpp-httplib implementation below.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post_json(const std::string& path,
                                 const std::string& body,
                                 const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

// base_url like "http://127.0.0.1:8089" or "https://api.example.com".
std::unique_ptr<HttpTransport> make_httplib_transport(
    const std::string& base_url, std::chrono::seconds timeout = std::chrono::seconds(120));

// One retry policy for all remote callers: bounded attempts with jittered
// exponential backoff. Sleeping is injectable so tests stay fast.
struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{1000};
  double jitter = 0.25;  // +-25% of the delay
  std::uint64_t seed = 0;
  std::function<void(std::chrono::milliseconds)> sleeper;  // default: real sleep
};

bool is_retryable_status(int status);

// Runs `attempt` up to policy.max_attempts times. `attempt` returns an
// HttpResponse; transport failures and retryable statuses trigger backoff.
// Returns the final response (success or the last failure).
HttpResponse retry_post(const RetryPolicy& policy,
                        const std::function<HttpResponse()>& attempt);

}  // namespace tkgqa
