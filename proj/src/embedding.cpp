#include "abf/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "abf/error.hpp"

namespace abf {
namespace {

bool is_word_char(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

char ascii_lower(unsigned char c) {
  return static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_word_char(c)) {
      current.push_back(ascii_lower(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<double> embed(std::string_view text, const EmbedderConfig& config) {
  if (config.dimension == 0) throw Error("dimension must be >= 1");
  std::vector<double> v(config.dimension, 0.0);
  const auto tokens = tokenize(text);
  if (tokens.empty()) return v;
  for (const auto& token : tokens) v[bucket_of(token, config.dimension)] += 1.0;
  const double norm = l2_norm(v);
  for (double& x : v) x /= norm;
  return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  // Zero terms are skipped: for finite inputs adding a zero product never
  // changes the accumulator, so this matches the dense sum bit for bit while
  // staying cheap on the sparse bag-of-words vectors.
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] != 0.0 && b[i] != 0.0) sum += a[i] * b[i];
  }
  return sum;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("embedding dimension mismatch");
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

}  // namespace abf
