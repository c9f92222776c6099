#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace abf {

// 64-bit FNV-1a. Changing either constant changes trace semantics.
inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x00000100000001b3ULL;

inline constexpr std::size_t kDefaultDimension = 256;

struct EmbedderConfig {
  std::size_t dimension = kDefaultDimension;
};

// ASCII-lowercased runs of [a-z0-9]; everything else separates.
std::vector<std::string> tokenize(std::string_view text);

constexpr std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = kFnvOffsetBasis;
  for (const char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= kFnvPrime;
  }
  return hash;
}

inline std::size_t bucket_of(std::string_view token, std::size_t dimension) {
  return static_cast<std::size_t>(fnv1a64(token) % dimension);
}

/// Hashed bag-of-words embedding: one count per token at
/// `fnv1a64(token) % dimension`, then L2-normalized. Text without tokens maps
/// to the all-zero vector.
std::vector<double> embed(std::string_view text, const EmbedderConfig& config = {});

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

/// dot(a, b) / (|a| |b|), clamped to [-1, 1]; 0 when either side is zero.
/// Throws abf::Error on length mismatch.
double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace abf
