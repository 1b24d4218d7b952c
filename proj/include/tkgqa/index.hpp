#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tkgqa/embedder.hpp"
#include "tkgqa/store.hpp"

namespace tkgqa {

// Canonical fact-to-text template shared by index build and query time:
// "{head} {relation} {tail} on {timestamp-as-ingested}", underscores in
// names replaced by spaces.
std::string verbalize_fact(const Quadruple& q, const TkgStore& store);

struct ScoredFact {
  FactId fact_id = 0;
  double score = 0.0;
};

// Dense matrix of unit-normalized fact embeddings, row i <-> fact_id i.
// Immutable after build; scoring is reentrant.
class FactIndex {
 public:
  FactIndex() = default;
  FactIndex(std::size_t dim, std::vector<float> data, std::string fingerprint);

  std::size_t rows() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::size_t dimension() const { return dim_; }
  const std::string& fingerprint() const { return fingerprint_; }
  std::span<const float> row(FactId id) const;
  std::span<const float> data() const { return data_; }

  // Binary file: magic, version, N, dim, fingerprint, then row-major
  // little-endian f32. The loader refuses a fingerprint mismatch against
  // the expected string unless force is set.
  void save(const std::string& path) const;
  static FactIndex load(const std::string& path,
                        const std::string& expected_fingerprint = "",
                        bool force = false);

 private:
  std::size_t dim_ = 0;
  std::vector<float> data_;
  std::string fingerprint_;
};

// Embeds every fact in fact_id order, unit-normalizing rows. Batches that
// fail transiently are retried up to max_batch_attempts before failing.
FactIndex build_index(const TkgStore& store, Embedder& embedder,
                      std::size_t batch_size = 256, int max_batch_attempts = 3);

// Cosine scores for the given candidates (index rows are unit vectors, so
// cosine reduces to a dot product). No ordering guarantee.
std::vector<ScoredFact> score(std::span<const float> query_vec,
                              std::span<const FactId> candidates,
                              const FactIndex& index);

}  // namespace tkgqa
