#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "memdialog/numerics.hpp"

namespace memdialog {

enum class EncodingMode { bow, position };
std::string_view to_string(EncodingMode m);
EncodingMode parse_encoding(std::string_view s);

/// Multi-hot vector over the vocabulary, stored as its sorted active indices.
struct BowVector {
  std::vector<int> active;
  std::size_t dim = 0;

  bool contains(int id) const;
  friend bool operator==(const BowVector&, const BowVector&) = default;
};

/// Throws std::out_of_range for ids outside [0, vocab_size).
BowVector bow_vector(std::span<const int> tokens, std::size_t vocab_size);

/// d x J matrix with l(k, j) = (1 - j/J) - (k/d)(1 - 2j/J), j and k one-based.
/// Stored zero-based: weights(k - 1, j - 1).
template <typename T>
Matrix<T> position_weights(std::size_t max_len, std::size_t dim);

/// Utterance embedding from a V x d table whose row w is the embedding of
/// word w (the column A[:, w] of the d x V matrix A).
///   bow:      sum of rows of the distinct words
///   position: sum_j l(:, j) * table[x_j], per occurrence
/// `weights` may be null in bow mode. Throws on empty input, or in position
/// mode when the utterance is longer than the weights' J.
template <typename T>
std::vector<T> embed_utterance(std::span<const int> tokens, const Matrix<T>& table,
                               EncodingMode mode, const Matrix<T>* weights);

/// Accumulates d(loss)/d(table) given d(loss)/d(embedding).
template <typename T>
void embed_utterance_backward(std::span<const int> tokens, std::span<const T> grad_embedding,
                              EncodingMode mode, const Matrix<T>* weights, Matrix<T>& grad_table);

}  // namespace memdialog
