#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "memdialog/memnet.hpp"

using namespace memdialog;

namespace {

MemNetParams<double> random_params(std::size_t V, std::size_t d, std::size_t hops, std::uint64_t seed) {
  MemNetParams<double> p;
  p.embeddings.push_back(init_normal<double>(V, d, 0.0, 0.5, derive_seed(seed, "A")));
  for (std::size_t h = 0; h < hops; ++h)
    p.hop_outputs.push_back(init_normal<double>(d, d, 0.0, 0.5, derive_seed(seed, "R" + std::to_string(h))));
  return p;
}

const std::vector<std::vector<int>> kHistory = {{0, 1, 2}, {3, 4}, {5, 1, 6, 7}, {2, 8}};
const std::vector<int> kQuery = {1, 9};

}  // namespace

TEST_CASE("embed_memory keeps source order") {
  const auto table = init_normal<double>(10, 4, 0.0, 1.0, 1);
  CHECK(embed_memory<double>({}, table, EncodingMode::bow, nullptr).empty());
  const std::vector<std::vector<int>> two = {{1}, {2}};
  const auto m = embed_memory<double>(two, table, EncodingMode::bow, nullptr);
  REQUIRE(m.size() == 2);
  CHECK(std::equal(m[0].begin(), m[0].end(), table.row(1).begin()));
  CHECK(std::equal(m[1].begin(), m[1].end(), table.row(2).begin()));
}

TEST_CASE("identity embedding gives multi-hot memory") {
  Matrix<double> eye(6, 6, 0.0);
  for (std::size_t i = 0; i < 6; ++i) eye(i, i) = 1.0;
  const std::vector<std::vector<int>> history = {{0, 3, 3, 5}};
  const auto m = embed_memory<double>(history, eye, EncodingMode::bow, nullptr);
  CHECK(m[0] == std::vector<double>{1, 0, 0, 1, 0, 1});
}

TEST_CASE("hop basics") {
  const auto R = init_normal<double>(3, 3, 0.0, 1.0, 2);
  const std::vector<double> q{0.2, -0.1, 0.4};

  const auto empty = hop<double>(q, {}, R);
  CHECK(empty.relevance.empty());
  CHECK(empty.output == std::vector<double>{0, 0, 0});

  const std::vector<std::vector<double>> one = {{1.0, 2.0, -1.0}};
  const auto h1 = hop<double>(q, one, R);
  REQUIRE(h1.relevance.size() == 1);
  CHECK(h1.relevance[0] == doctest::Approx(1.0));
  std::vector<double> rm(3);
  matvec<double>(R, one[0], rm);
  for (std::size_t k = 0; k < 3; ++k) CHECK(h1.output[k] == doctest::Approx(rm[k]));

  const std::vector<std::vector<double>> twins = {{1.0, 0.5, 0.0}, {1.0, 0.5, 0.0}};
  const auto h2 = hop<double>(q, twins, R);
  CHECK(h2.relevance[0] == doctest::Approx(0.5));
  CHECK(h2.relevance[1] == doctest::Approx(0.5));
}

TEST_CASE("hop is permutation equivariant") {
  Rng rng(4);
  const auto R = init_normal<double>(5, 5, 0.0, 1.0, 6);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::vector<double>> memory(2 + rng.below(6), std::vector<double>(5));
    for (auto& m : memory)
      for (auto& x : m) x = rng.normal(0, 1);
    std::vector<double> q(5);
    for (auto& x : q) x = rng.normal(0, 1);
    std::vector<std::size_t> perm(memory.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    std::vector<std::vector<double>> permuted;
    for (auto i : perm) permuted.push_back(memory[i]);

    const auto a = hop<double>(q, memory, R), b = hop<double>(q, permuted, R);
    for (std::size_t i = 0; i < perm.size(); ++i) CHECK(b.relevance[i] == doctest::Approx(a.relevance[perm[i]]));
    for (std::size_t k = 0; k < 5; ++k) CHECK(b.output[k] == doctest::Approx(a.output[k]));
  }
}

TEST_CASE("relevance ordering survives scaling the query") {
  Rng rng(12);
  const auto R = init_normal<double>(4, 4, 0.0, 1.0, 2);
  std::vector<std::vector<double>> memory(6, std::vector<double>(4));
  for (auto& m : memory)
    for (auto& x : m) x = rng.normal(0, 1);
  std::vector<double> q(4);
  for (auto& x : q) x = rng.normal(0, 1);
  const auto base = hop<double>(q, memory, R).relevance;
  for (double c : {0.1, 2.0, 7.5}) {
    auto scaled = q;
    for (auto& x : scaled) x *= c;
    const auto p = hop<double>(scaled, memory, R).relevance;
    CHECK(argmax<double>(p) == argmax<double>(base));
    for (std::size_t i = 0; i < p.size(); ++i)
      for (std::size_t j = 0; j < p.size(); ++j)
        if (base[i] > base[j]) CHECK(p[i] >= p[j]);
  }
}

TEST_CASE("forward with empty history returns the query embedding") {
  const auto params = random_params(10, 6, 3, 1);
  const EncodingContext<double> enc{};
  const auto trace = memnet_forward<double>({}, kQuery, params, enc);
  CHECK(trace.output() == trace.queries.front());
  for (const auto& p : trace.attention()) CHECK(p.empty());
}

TEST_CASE("one hop adds R times the attended memory") {
  const auto params = random_params(10, 6, 1, 2);
  const EncodingContext<double> enc{};
  const auto trace = memnet_forward<double>(kHistory, kQuery, params, enc);
  const auto q1 = embed_utterance<double>(kQuery, params.embeddings[0], EncodingMode::bow, nullptr);
  const auto memory = embed_memory<double>(kHistory, params.embeddings[0], EncodingMode::bow, nullptr);
  const auto h = hop<double>(q1, memory, params.hop_outputs[0]);
  for (std::size_t k = 0; k < 6; ++k) CHECK(trace.output()[k] == doctest::Approx(q1[k] + h.output[k]));
}

TEST_CASE("three hops compose manually") {
  const auto l = position_weights<double>(4, 6);
  const auto params = random_params(10, 6, 3, 3);
  const EncodingContext<double> enc{EncodingMode::position, EncodingMode::position, &l};
  const auto trace = memnet_forward<double>(kHistory, kQuery, params, enc);

  auto q = embed_utterance<double>(kQuery, params.embeddings[0], EncodingMode::position, &l);
  const auto memory = embed_memory<double>(kHistory, params.embeddings[0], EncodingMode::position, &l);
  for (std::size_t h = 0; h < 3; ++h) {
    const auto r = hop<double>(q, memory, params.hop_outputs[h]);
    for (std::size_t i = 0; i < r.relevance.size(); ++i)
      CHECK(trace.attention()[h][i] == doctest::Approx(r.relevance[i]));
    for (std::size_t k = 0; k < q.size(); ++k) q[k] += r.output[k];
  }
  for (std::size_t k = 0; k < q.size(); ++k) CHECK(trace.output()[k] == doctest::Approx(q[k]));
  CHECK(trace.queries.size() == 4);
}

TEST_CASE("attention lies on the simplex and forward is deterministic") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const auto params = random_params(10, 5, 1 + rng.below(3), rng.next_u64());
    const EncodingContext<double> enc{};
    const auto a = memnet_forward<double>(kHistory, kQuery, params, enc);
    const auto b = memnet_forward<double>(kHistory, kQuery, params, enc);
    CHECK(a.output() == b.output());
    for (const auto& p : a.attention()) {
      double s = 0;
      for (double x : p) {
        CHECK(x >= 0.0);
        s += x;
      }
      CHECK(std::abs(s - 1.0) <= 1e-6);
    }
  }
}
