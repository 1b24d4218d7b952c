#include "tkgqa/index.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "tkgqa/errors.hpp"
#include "tkgqa/kernels.hpp"
#include "tkgqa/util.hpp"

namespace tkgqa {

static_assert(std::endian::native == std::endian::little,
              "index file io assumes a little-endian host");

std::string verbalize_fact(const Quadruple& q, const TkgStore& store) {
  const auto clean = [](const std::string& s) {
    return replace_all(s, "_", " ");
  };
  return clean(store.entity_name(q.head)) + " " +
         clean(store.relation_name(q.relation)) + " " +
         clean(store.entity_name(q.tail)) + " on " + q.time_text;
}

FactIndex::FactIndex(std::size_t dim, std::vector<float> data,
                     std::string fingerprint)
    : dim_(dim), data_(std::move(data)), fingerprint_(std::move(fingerprint)) {
  if (dim_ == 0 || data_.size() % dim_ != 0) {
    throw DimensionMismatch("index data size " + std::to_string(data_.size()) +
                            " is not a multiple of dim " + std::to_string(dim_));
  }
}

std::span<const float> FactIndex::row(FactId id) const {
  if (static_cast<std::size_t>(id) >= rows()) throw UnknownFactId(id);
  return {data_.data() + static_cast<std::size_t>(id) * dim_, dim_};
}

namespace {
constexpr char kMagic[8] = {'T', 'K', 'G', 'F', 'I', 'D', 'X', '\0'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void FactIndex::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write index file: " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kVersion;
  const std::uint64_t n = rows();
  const std::uint32_t dim = static_cast<std::uint32_t>(dim_);
  const std::uint32_t fp_len = static_cast<std::uint32_t>(fingerprint_.size());
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
  out.write(reinterpret_cast<const char*>(&fp_len), sizeof(fp_len));
  out.write(fingerprint_.data(), fp_len);
  out.write(reinterpret_cast<const char*>(data_.data()),
            static_cast<std::streamsize>(data_.size() * sizeof(float)));
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

FactIndex FactIndex::load(const std::string& path,
                          const std::string& expected_fingerprint, bool force) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open index file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not an index file: " + path);
  }
  std::uint32_t version = 0, dim = 0, fp_len = 0;
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
  in.read(reinterpret_cast<char*>(&fp_len), sizeof(fp_len));
  if (!in || version != kVersion) {
    throw IoError("unsupported index file version in " + path);
  }
  std::string fingerprint(fp_len, '\0');
  in.read(fingerprint.data(), fp_len);
  std::vector<float> data(static_cast<std::size_t>(n) * dim);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!in) throw IoError("truncated index file: " + path);
  if (!expected_fingerprint.empty() && fingerprint != expected_fingerprint &&
      !force) {
    throw UsageError("index fingerprint \"" + fingerprint +
                     "\" does not match configured embedder \"" +
                     expected_fingerprint + "\" (use force to override)");
  }
  if (dim == 0) throw IoError("corrupt index file (dim=0): " + path);
  return FactIndex(dim, std::move(data), std::move(fingerprint));
}

FactIndex build_index(const TkgStore& store, Embedder& embedder,
                      std::size_t batch_size, int max_batch_attempts) {
  if (batch_size == 0) throw UsageError("batch_size must be positive");
  const std::size_t n = store.fact_count();
  const std::size_t dim = embedder.dimension();
  std::vector<float> data(n * dim, 0.0f);

  std::vector<std::string> texts;
  texts.reserve(n);
  for (const auto& q : store.facts()) {
    texts.push_back(verbalize_fact(q, store));
  }

  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t count = std::min(batch_size, n - begin);
    const std::span<const std::string> batch(texts.data() + begin, count);
    std::vector<std::vector<float>> vecs;
    for (int attempt = 1;; ++attempt) {
      try {
        vecs = embedder.embed_batch(batch);
        break;
      } catch (const EmbedderUnavailable&) {
        if (attempt >= max_batch_attempts) throw;
      }
    }
    if (vecs.size() != count) {
      throw EmbedderUnavailable("embedder returned " +
                                std::to_string(vecs.size()) + " vectors for " +
                                std::to_string(count) + " inputs");
    }
    for (std::size_t i = 0; i < count; ++i) {
      if (vecs[i].size() != dim) {
        throw DimensionMismatch("embedder returned width " +
                                std::to_string(vecs[i].size()) +
                                ", declared " + std::to_string(dim));
      }
      std::memcpy(data.data() + (begin + i) * dim, vecs[i].data(),
                  dim * sizeof(float));
    }
  }

  kernels::normalize_rows(data, n, dim);
  return FactIndex(dim, std::move(data), embedder.fingerprint());
}

std::vector<ScoredFact> score(std::span<const float> query_vec,
                              std::span<const FactId> candidates,
                              const FactIndex& index) {
  if (query_vec.size() != index.dimension()) {
    throw DimensionMismatch("query width " + std::to_string(query_vec.size()) +
                            " does not match index dim " +
                            std::to_string(index.dimension()));
  }
  for (FactId id : candidates) {
    if (static_cast<std::size_t>(id) >= index.rows()) throw UnknownFactId(id);
  }
  std::vector<double> raw(candidates.size());
  kernels::dot_scores(index.data(), index.dimension(), query_vec, candidates,
                      raw);
  std::vector<ScoredFact> out(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out[i] = {candidates[i], raw[i]};
  }
  return out;
}

}  // namespace tkgqa
