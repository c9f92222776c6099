#include <algorithm>
#include <fstream>
#include <sstream>

#include "abf/embedding.hpp"
#include "abf/error.hpp"
#include "abf/rng.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace abf;

TEST_CASE("tokenize splits on non-alphanumerics and folds ASCII case") {
  CHECK(tokenize("Hotel in Cambridge!") == std::vector<std::string>{"hotel", "in", "cambridge"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("a--b  42") == std::vector<std::string>{"a", "b", "42"});
  // Non-ASCII bytes separate tokens and are never case-folded.
  CHECK(tokenize("caf\xc3\xa9 BAR") == std::vector<std::string>{"caf", "bar"});
}

TEST_CASE("embed of empty text is the zero vector") {
  const auto v = embed("");
  CHECK(v.size() == kDefaultDimension);
  CHECK(std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; }));
  CHECK(embed("?!  ..") == v);
}

TEST_CASE("single token lands on its FNV-1a bucket") {
  // 0x2e78eb99a1612fee % 256, from tests/golden/make_fnv_golden.py
  const auto v = embed("memory");
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] == (i == 238 ? 1.0 : 0.0));
  CHECK(embed("memory memory") == v);
  CHECK(embed("MEMORY") == v);
}

TEST_CASE("embed rejects dimension zero") {
  CHECK_THROWS_AS(embed("x", EmbedderConfig{0}), Error);
}

TEST_CASE("golden FNV-1a buckets") {
  std::ifstream in(ABF_GOLDEN_DIR "/fnv1a_tokens.tsv");
  REQUIRE(in);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string token, hex;
    std::size_t index = 0;
    fields >> token >> hex >> index;
    CAPTURE(token);
    CHECK(fnv1a64(token) == std::stoull(hex, nullptr, 16));
    CHECK(bucket_of(token, 256) == index);
    ++rows;
  }
  CHECK(rows == 10);
}

TEST_CASE("cosine conventions") {
  const auto v = embed("hotel in cambridge");
  CHECK(cosine(v, v) == doctest::Approx(1.0).epsilon(1e-12));
  // "memory" -> 238 and "hotel" -> 93: orthogonal one-hot vectors.
  CHECK(cosine(embed("memory"), embed("hotel")) == 0.0);
  CHECK(cosine(v, embed("")) == 0.0);
  CHECK(cosine(std::vector<double>{-1.0, 0.0}, std::vector<double>{1.0, 0.0}) == -1.0);
  CHECK_THROWS_AS(cosine(std::vector<double>(3), std::vector<double>(4)), Error);
}

TEST_CASE("embedding properties over random texts") {
  SplitMix64 rng{11};
  for (int trial = 0; trial < 300; ++trial) {
    const auto text = testing::random_text(rng, 10);
    const auto v = embed(text);
    CHECK(v == embed(text));
    if (!tokenize(text).empty()) CHECK(std::abs(l2_norm(v) - 1.0) <= 1e-9);

    // Any token permutation embeds identically.
    auto tokens = tokenize(text);
    std::reverse(tokens.begin(), tokens.end());
    if (tokens.size() > 2) std::swap(tokens[0], tokens[tokens.size() / 2]);
    std::string shuffled;
    for (const auto& t : tokens) shuffled += t + " ";
    CHECK(embed(shuffled) == v);

    const auto w = embed(testing::random_text(rng, 10));
    const double c = cosine(v, w);
    CHECK(c == cosine(w, v));
    CHECK(c >= 0.0);
    CHECK(c <= 1.0);
  }
}
