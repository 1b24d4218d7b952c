#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace tkgqa {

// Data-parallel primitives behind the search tool. Each function is
// deterministic regardless of thread count: parallelism is across rows,
// never inside one row's accumulation, so results are bitwise identical
// to a serial run. The serial counterparts live in tkgqa::reference and
// back the oracle tests and the benchmark.
namespace kernels {

// scores[i] = dot(query, data[candidates[i] * dim .. +dim]).
// Accumulation is sequential per candidate, in double.
void dot_scores(std::span<const float> data, std::size_t dim,
                std::span<const float> query,
                std::span<const std::uint32_t> candidates,
                std::span<double> scores);

// flags[i] = pred(i) for i in [0, n). Predicate must be pure.
void predicate_flags(std::size_t n, const std::function<bool(std::size_t)>& pred,
                     std::vector<std::uint8_t>& flags);

// Collects indices with nonzero flags, ascending.
std::vector<std::uint32_t> compact_flags(const std::vector<std::uint8_t>& flags);

// L2-normalizes each row in place; zero rows become the first-basis vector.
void normalize_rows(std::span<float> data, std::size_t rows, std::size_t dim);

}  // namespace kernels
}  // namespace tkgqa
