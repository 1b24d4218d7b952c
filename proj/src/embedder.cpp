#include "tkgqa/embedder.hpp"

#include <cmath>
#include <cstdlib>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "tkgqa/errors.hpp"
#include "tkgqa/util.hpp"

namespace tkgqa {

std::vector<float> Embedder::embed_one(const std::string& text) {
  const std::string texts[1] = {text};
  auto out = embed_batch(std::span<const std::string>(texts, 1));
  if (out.size() != 1) {
    throw EmbedderUnavailable(name() + ": expected 1 vector, got " +
                              std::to_string(out.size()));
  }
  return std::move(out[0]);
}

std::string Embedder::fingerprint() const {
  return name() + "(dim=" + std::to_string(dimension()) + ")";
}

HashEmbedder::HashEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension < 2) {
    throw UsageError("hash embedder dimension must be >= 2, got " +
                     std::to_string(dimension));
  }
  name_ = "hash-" + std::to_string(dimension) + "-" + std::to_string(seed);
}

std::vector<float> HashEmbedder::embed_text(const std::string& text) const {
  std::vector<float> v(dimension_, 0.0f);
  double norm_sq = 0.0;
  for (const auto& token : split_ws(to_lower(text))) {
    const std::uint64_t h = fnv1a64(token, 14695981039346656037ull ^ seed_);
    v[h % dimension_] += 1.0f;
  }
  for (float x : v) norm_sq += static_cast<double>(x) * x;
  if (norm_sq == 0.0) {
    v[0] = 1.0f;
    return v;
  }
  const auto inv = static_cast<float>(1.0 / std::sqrt(norm_sq));
  for (float& x : v) x *= inv;
  return v;
}

std::vector<std::vector<float>> HashEmbedder::embed_batch(
    std::span<const std::string> texts) {
  std::vector<std::vector<float>> out(texts.size());
  const auto n = static_cast<std::int64_t>(texts.size());
#pragma omp parallel for schedule(static) if (n > 256)
  for (std::int64_t i = 0; i < n; ++i) {
    out[i] = embed_text(texts[i]);
  }
  return out;
}

RemoteEmbedder::RemoteEmbedder(Config cfg)
    : RemoteEmbedder(std::move(cfg), nullptr) {
  transport_ = make_httplib_transport(cfg_.endpoint);
}

RemoteEmbedder::RemoteEmbedder(Config cfg,
                               std::unique_ptr<HttpTransport> transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)) {
  name_ = "remote-" + cfg_.model;
}

std::vector<std::vector<float>> RemoteEmbedder::embed_batch(
    std::span<const std::string> texts) {
  if (texts.empty()) return {};
  nlohmann::json body;
  body["model"] = cfg_.model;
  body["input"] = nlohmann::json::array();
  for (const auto& t : texts) body["input"].push_back(t);

  std::vector<std::pair<std::string, std::string>> headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str())) {
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }

  const std::string payload = body.dump();
  HttpResponse res = retry_post(cfg_.retry, [&] {
    return transport_->post_json(cfg_.path, payload, headers);
  });
  if (res.status == 0) {
    throw EmbedderUnavailable("embeddings endpoint unreachable: " + res.error);
  }
  if (res.status != 200) {
    throw EmbedderUnavailable("embeddings endpoint returned HTTP " +
                              std::to_string(res.status) + ": " + res.body);
  }

  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(res.body);
  } catch (const nlohmann::json::exception& e) {
    throw EmbedderUnavailable(std::string("bad embeddings response: ") + e.what());
  }
  if (!reply.contains("data") || !reply["data"].is_array() ||
      reply["data"].size() != texts.size()) {
    throw EmbedderUnavailable("embeddings response has wrong data arity");
  }

  std::vector<std::vector<float>> out(texts.size());
  for (const auto& item : reply["data"]) {
    const auto idx = item.value("index", static_cast<std::int64_t>(-1));
    if (idx < 0 || static_cast<std::size_t>(idx) >= texts.size()) {
      throw EmbedderUnavailable("embeddings response has bad index");
    }
    const auto& emb = item.at("embedding");
    std::vector<float> v;
    v.reserve(emb.size());
    for (const auto& x : emb) v.push_back(x.get<float>());
    if (v.size() != cfg_.dimension) {
      throw DimensionMismatch("embedder returned width " +
                              std::to_string(v.size()) + ", configured " +
                              std::to_string(cfg_.dimension));
    }
    out[static_cast<std::size_t>(idx)] = std::move(v);
  }
  return out;
}

std::unique_ptr<Embedder> make_embedder(const std::string& selector) {
  const auto colon = selector.find(':');
  const std::string kind = selector.substr(0, colon);
  std::unordered_map<std::string, std::string> kv;
  if (colon != std::string::npos) {
    for (const auto& part : split(selector.substr(colon + 1), ',')) {
      const auto eq = part.find('=');
      if (eq == std::string::npos) {
        throw UsageError("bad embedder option: " + part);
      }
      kv[trim(part.substr(0, eq))] = trim(part.substr(eq + 1));
    }
  }
  const auto get = [&](const std::string& key, const std::string& dflt) {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : it->second;
  };

  if (kind == "hash") {
    const std::size_t dim = std::stoul(get("dim", "64"));
    const std::uint64_t seed = std::stoull(get("seed", "42"));
    return std::make_unique<HashEmbedder>(dim, seed);
  }
  if (kind == "remote") {
    RemoteEmbedder::Config cfg;
    cfg.model = get("model", "");
    if (cfg.model.empty()) throw UsageError("remote embedder requires model=");
    cfg.endpoint = get("endpoint", "");
    if (cfg.endpoint.empty()) throw UsageError("remote embedder requires endpoint=");
    cfg.dimension = std::stoul(get("dim", "256"));
    cfg.path = get("path", "/v1/embeddings");
    cfg.api_key_env = get("key_env", "EMBEDDER_API_KEY");
    return std::make_unique<RemoteEmbedder>(std::move(cfg));
  }
  throw UsageError("unknown embedder kind: \"" + kind +
                   "\" (expected hash or remote)");
}

}  // namespace tkgqa
