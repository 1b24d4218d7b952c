#include "tkgqa/http.hpp"

#include <random>
#include <thread>

#include <httplib.h>

namespace tkgqa {

namespace {

class HttplibTransport : public HttpTransport {
 public:
  HttplibTransport(std::string base_url, std::chrono::seconds timeout)
      : client_(base_url) {
    client_.set_connection_timeout(timeout.count(), 0);
    client_.set_read_timeout(timeout.count(), 0);
    client_.set_write_timeout(timeout.count(), 0);
  }

  HttpResponse post_json(const std::string& path, const std::string& body,
                         const std::vector<std::pair<std::string, std::string>>& headers) override {
    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) hdrs.emplace(k, v);
    auto res = client_.Post(path, hdrs, body, "application/json");
    HttpResponse out;
    if (!res) {
      out.status = 0;
      out.error = httplib::to_string(res.error());
      return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
  }

 private:
  httplib::Client client_;
};

}  // namespace

std::unique_ptr<HttpTransport> make_httplib_transport(
    const std::string& base_url, std::chrono::seconds timeout) {
  return std::make_unique<HttplibTransport>(base_url, timeout);
}

bool is_retryable_status(int status) {
  return status == 0 || status == 408 || status == 409 || status == 429 ||
         status >= 500;
}

HttpResponse retry_post(const RetryPolicy& policy,
                        const std::function<HttpResponse()>& attempt) {
  std::mt19937_64 rng(policy.seed);
  HttpResponse last;
  for (int i = 0; i < policy.max_attempts; ++i) {
    last = attempt();
    if (!is_retryable_status(last.status)) return last;
    if (i + 1 == policy.max_attempts) break;
    auto delay = policy.backoff_base * (1 << i);
    if (policy.jitter > 0.0) {
      std::uniform_real_distribution<double> dist(1.0 - policy.jitter,
                                                  1.0 + policy.jitter);
      delay = std::chrono::milliseconds(
          static_cast<std::int64_t>(static_cast<double>(delay.count()) * dist(rng)));
    }
    if (policy.sleeper) {
      policy.sleeper(delay);
    } else {
      std::this_thread::sleep_for(delay);
    }
  }
  return last;
}

}  // namespace tkgqa
