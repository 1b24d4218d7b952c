#include "tkgqa/kernels.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tkgqa::kernels {

void dot_scores(std::span<const float> data, std::size_t dim,
                std::span<const float> query,
                std::span<const std::uint32_t> candidates,
                std::span<double> scores) {
  const auto n = static_cast<std::int64_t>(candidates.size());
#pragma omp parallel for schedule(static) if (n > 512)
  for (std::int64_t i = 0; i < n; ++i) {
    const float* row = data.data() + static_cast<std::size_t>(candidates[i]) * dim;
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      acc += static_cast<double>(row[d]) * static_cast<double>(query[d]);
    }
    scores[i] = acc;
  }
}

void predicate_flags(std::size_t n, const std::function<bool(std::size_t)>& pred,
                     std::vector<std::uint8_t>& flags) {
  flags.assign(n, 0);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (count > 4096)
  for (std::int64_t i = 0; i < count; ++i) {
    flags[i] = pred(static_cast<std::size_t>(i)) ? 1 : 0;
  }
}

std::vector<std::uint32_t> compact_flags(const std::vector<std::uint8_t>& flags) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i]) out.push_back(static_cast<std::uint32_t>(i));
  }
  return out;
}

void normalize_rows(std::span<float> data, std::size_t rows, std::size_t dim) {
  const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static) if (n > 512)
  for (std::int64_t i = 0; i < n; ++i) {
    float* row = data.data() + static_cast<std::size_t>(i) * dim;
    double norm_sq = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      norm_sq += static_cast<double>(row[d]) * static_cast<double>(row[d]);
    }
    if (norm_sq == 0.0) {
      row[0] = 1.0f;
      continue;
    }
    const auto inv = static_cast<float>(1.0 / std::sqrt(norm_sq));
    for (std::size_t d = 0; d < dim; ++d) row[d] *= inv;
  }
}

}  // namespace tkgqa::kernels
