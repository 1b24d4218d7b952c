#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tkgqa {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Splits on a single delimiter; keeps empty fields.
std::vector<std::string> split(std::string_view s, char delim);

// Splits on runs of ASCII whitespace; drops empty tokens.
std::vector<std::string> split_ws(std::string_view s);

std::string replace_all(std::string_view s, std::string_view from,
                        std::string_view to);

// Collapses internal whitespace runs to a single space.
std::string collapse_ws(std::string_view s);

std::string join(const std::vector<std::string>& parts,
                 std::string_view sep);

// Fixed-point decimal formatting (printf "%.*f").
std::string format_fixed(double value, int decimals);

// splitmix64; used to fan one run seed out to per-subsystem seeds.
std::uint64_t mix_seed(std::uint64_t seed);

// Deterministic per-subsystem seed derivation: hash of the subsystem name
// folded into the run seed. Stable across platforms.
std::uint64_t subsystem_seed(std::uint64_t run_seed, std::string_view name);

// FNV-1a 64-bit over bytes, optionally keyed. Stable across platforms
// (std::hash is not).
std::uint64_t fnv1a64(std::string_view s, std::uint64_t basis = 14695981039346656037ull);

}  // namespace tkgqa
