#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tkgqa/http.hpp"

namespace tkgqa {

// Text-to-vector encoder. Implementations must be deterministic for a fixed
// configuration and always return exactly dimension() finite components.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual const std::string& name() const = 0;
  virtual std::size_t dimension() const = 0;

  // One vector per input text, in input order.
  virtual std::vector<std::vector<float>> embed_batch(
      std::span<const std::string> texts) = 0;

  std::vector<float> embed_one(const std::string& text);

  // Identifies the embedder configuration; persisted index files carry it
  // so a mismatched loader can refuse.
  virtual std::string fingerprint() const;
};

// Deterministic offline embedder: lowercased whitespace tokens hashed into
// `dimension` buckets (+1 per hit), then L2-normalized. All-zero
// accumulations map to the first-basis unit vector.
class HashEmbedder : public Embedder {
 public:
  HashEmbedder(std::size_t dimension, std::uint64_t seed);
  const std::string& name() const override { return name_; }
  std::size_t dimension() const override { return dimension_; }
  std::vector<std::vector<float>> embed_batch(
      std::span<const std::string> texts) override;
  std::uint64_t seed() const { return seed_; }

 private:
  std::vector<float> embed_text(const std::string& text) const;
  std::size_t dimension_;
  std::uint64_t seed_;
  std::string name_;
};

// Client for the common embeddings endpoint: POST {model, input:[...]} ->
// {data:[{index, embedding:[...]}]}. Serves both index build and query time.
class RemoteEmbedder : public Embedder {
 public:
  struct Config {
    std::string endpoint;       // e.g. "https://api.example.com"
    std::string path = "/v1/embeddings";
    std::string model;
    std::size_t dimension = 256;
    std::string api_key_env = "EMBEDDER_API_KEY";
    RetryPolicy retry;
  };

  explicit RemoteEmbedder(Config cfg);
  // Test constructor with an injected transport.
  RemoteEmbedder(Config cfg, std::unique_ptr<HttpTransport> transport);

  const std::string& name() const override { return name_; }
  std::size_t dimension() const override { return cfg_.dimension; }
  std::vector<std::vector<float>> embed_batch(
      std::span<const std::string> texts) override;

 private:
  Config cfg_;
  std::unique_ptr<HttpTransport> transport_;
  std::string name_;
};

// Parses an embedder selector: "hash:dim=64,seed=42" or
// "remote:model=M,dim=256,endpoint=URL[,path=P][,key_env=VAR]".
std::unique_ptr<Embedder> make_embedder(const std::string& selector);

}  // namespace tkgqa
