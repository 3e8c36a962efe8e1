#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "memdialog/corpus.hpp"
#include "memdialog/encoding.hpp"

using namespace memdialog;

namespace {

// Independent oracle: l_kj written out from the definition, 1-based.
double l_oracle(double k, double j, double J, double d) {
  return (1.0 - j / J) - (k / d) * (1.0 - 2.0 * j / J);
}

}  // namespace

TEST_CASE("bow vectors") {
  CHECK(bow_vector({}, 5).active.empty());
  const std::vector<int> aab{2, 2, 4};
  const auto b = bow_vector(aab, 5);
  CHECK(b.active == std::vector<int>{2, 4});
  CHECK(b.contains(2));
  CHECK_FALSE(b.contains(3));
  const std::vector<int> bad{5};
  CHECK_THROWS_AS(bow_vector(bad, 5), std::out_of_range);
}

TEST_CASE("bow ignores word order") {
  auto words = tokenize("i'm in the office and not in the production hall");
  const auto v = Vocabulary::build({}, nullptr, 1);
  std::vector<std::string> vocab_words = v.words();
  for (const auto& w : words)
    if (std::find(vocab_words.begin(), vocab_words.end(), w) == vocab_words.end()) vocab_words.insert(vocab_words.begin(), w);
  const auto vocab = Vocabulary::from_words(vocab_words);
  auto ids = vocab.encode(words);
  const auto reference = bow_vector(ids, vocab.size());
  std::sort(ids.begin(), ids.end());
  do {
    CHECK(bow_vector(ids, vocab.size()) == reference);
  } while (std::next_permutation(ids.begin(), ids.begin() + 5));
}

TEST_CASE("position weight examples") {
  const auto one = position_weights<double>(1, 4);
  CHECK(one.rows() == 4);
  CHECK(one.cols() == 1);
  for (std::size_t k = 0; k < 4; ++k) CHECK(one(k, 0) == doctest::Approx((k + 1) / 4.0));

  const auto two = position_weights<double>(2, 2);
  CHECK(two(0, 0) == doctest::Approx(0.5));
  CHECK(two(0, 1) == doctest::Approx(0.5));
  CHECK(two(1, 0) == doctest::Approx(0.5));
  CHECK(two(1, 1) == doctest::Approx(1.0));

  for (std::size_t n : {1, 3, 17}) CHECK(position_weights<double>(n, n)(n - 1, n - 1) == doctest::Approx(1.0));
  CHECK_THROWS(position_weights<double>(0, 3));
  CHECK_THROWS(position_weights<double>(3, 0));
}

TEST_CASE("position weights match the formula oracle") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t J = 1 + rng.below(50), d = 1 + rng.below(100);
    const auto l = position_weights<double>(J, d);
    double worst = 0;
    for (std::size_t k = 1; k <= d; ++k)
      for (std::size_t j = 1; j <= J; ++j)
        worst = std::max(worst, std::abs(l(k - 1, j - 1) - l_oracle(double(k), double(j), double(J), double(d))));
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("single-token embedding") {
  Matrix<double> table(3, 4);
  for (std::size_t i = 0; i < table.size(); ++i) table.values()[i] = 0.1 * static_cast<double>(i) - 0.3;
  const auto l = position_weights<double>(1, 4);
  const std::vector<int> w{1};
  const auto bow = embed_utterance<double>(w, table, EncodingMode::bow, nullptr);
  const auto pos = embed_utterance<double>(w, table, EncodingMode::position, &l);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(bow[k] == doctest::Approx(table(1, k)));
    CHECK(pos[k] == doctest::Approx(table(1, k) * l(k, 0)));
  }
  CHECK_THROWS(embed_utterance<double>(std::span<const int>{}, table, EncodingMode::bow, nullptr));
  const std::vector<int> too_long{0, 1};
  CHECK_THROWS(embed_utterance<double>(too_long, table, EncodingMode::position, &l));
}

TEST_CASE("position encoding is order sensitive, bow is not") {
  Matrix<double> table(2, 2, 0.0);
  table(0, 0) = 1.0;  // w1 -> e1
  table(1, 1) = 1.0;  // w2 -> e2
  const auto l = position_weights<double>(2, 2);
  const std::vector<int> ab{0, 1}, ba{1, 0};
  const auto pab = embed_utterance<double>(ab, table, EncodingMode::position, &l);
  const auto pba = embed_utterance<double>(ba, table, EncodingMode::position, &l);
  CHECK(pab[0] == doctest::Approx(0.5));
  CHECK(pab[1] == doctest::Approx(1.0));
  CHECK(pba[0] == doctest::Approx(0.5));
  CHECK(pba[1] == doctest::Approx(0.5));
  CHECK(pab != pba);
  CHECK(embed_utterance<double>(ab, table, EncodingMode::bow, nullptr) ==
        embed_utterance<double>(ba, table, EncodingMode::bow, nullptr));
}

TEST_CASE("bow counts distinct words, position counts occurrences") {
  Matrix<double> table(2, 3, 1.0);
  const auto l = position_weights<double>(3, 3);
  const std::vector<int> dup{0, 0};
  const auto bow = embed_utterance<double>(dup, table, EncodingMode::bow, nullptr);
  CHECK(bow[0] == doctest::Approx(1.0));
  const auto pos = embed_utterance<double>(dup, table, EncodingMode::position, &l);
  CHECK(pos[0] == doctest::Approx(l(0, 0) + l(0, 1)));
}

TEST_CASE("embedding is linear in the table") {
  Rng rng(8);
  const auto l = position_weights<double>(6, 5);
  for (auto mode : {EncodingMode::bow, EncodingMode::position}) {
    const auto a1 = init_normal<double>(9, 5, 0.0, 1.0, rng.next_u64());
    const auto a2 = init_normal<double>(9, 5, 0.0, 1.0, rng.next_u64());
    Matrix<double> sum = a1;
    for (std::size_t i = 0; i < sum.size(); ++i) sum.values()[i] += a2.values()[i];
    const std::vector<int> tokens{3, 1, 3, 8, 0};
    const auto e1 = embed_utterance<double>(tokens, a1, mode, &l);
    const auto e2 = embed_utterance<double>(tokens, a2, mode, &l);
    const auto es = embed_utterance<double>(tokens, sum, mode, &l);
    for (std::size_t k = 0; k < es.size(); ++k)
      CHECK(std::abs(es[k] - (e1[k] + e2[k])) <= 1e-5 * std::max(1.0, std::abs(es[k])));
  }
}

TEST_CASE("position encoding reacts to any swap of distinct words") {
  Rng rng(23);
  const auto l = position_weights<double>(8, 6);
  const auto table = init_normal<double>(12, 6, 0.0, 1.0, 4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> tokens(2 + rng.below(7));
    for (auto& t : tokens) t = static_cast<int>(rng.below(12));
    const auto i = rng.below(tokens.size()), j = rng.below(tokens.size());
    if (tokens[i] == tokens[j]) continue;
    auto swapped = tokens;
    std::swap(swapped[i], swapped[j]);
    const auto a = embed_utterance<double>(tokens, table, EncodingMode::position, &l);
    const auto b = embed_utterance<double>(swapped, table, EncodingMode::position, &l);
    double diff = 0;
    for (std::size_t k = 0; k < a.size(); ++k) diff = std::max(diff, std::abs(a[k] - b[k]));
    CHECK(diff > 1e-9);
    CHECK(embed_utterance<double>(tokens, table, EncodingMode::bow, nullptr) ==
          embed_utterance<double>(swapped, table, EncodingMode::bow, nullptr));
  }
}

TEST_CASE("encoding names") {
  CHECK(parse_encoding("bow") == EncodingMode::bow);
  CHECK(to_string(EncodingMode::position) == "position");
  CHECK_THROWS(parse_encoding("onehot"));
}
