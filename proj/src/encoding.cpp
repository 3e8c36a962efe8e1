#include "memdialog/encoding.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace memdialog {

std::string_view to_string(EncodingMode m) {
  return m == EncodingMode::bow ? "bow" : "position";
}

EncodingMode parse_encoding(std::string_view s) {
  if (s == "bow") return EncodingMode::bow;
  if (s == "position") return EncodingMode::position;
  throw std::invalid_argument("unknown encoding '" + std::string(s) + "' (expected bow or position)");
}

bool BowVector::contains(int id) const {
  return std::binary_search(active.begin(), active.end(), id);
}

BowVector bow_vector(std::span<const int> tokens, std::size_t vocab_size) {
  BowVector v;
  v.dim = vocab_size;
  for (int t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_size)
      throw std::out_of_range("bow_vector: token id " + std::to_string(t) +
                              " outside vocabulary of size " + std::to_string(vocab_size));
    v.active.push_back(t);
  }
  std::sort(v.active.begin(), v.active.end());
  v.active.erase(std::unique(v.active.begin(), v.active.end()), v.active.end());
  return v;
}

template <typename T>
Matrix<T> position_weights(std::size_t max_len, std::size_t dim) {
  if (max_len == 0 || dim == 0)
    throw std::invalid_argument("position_weights: J and d must be >= 1");
  Matrix<T> l(dim, max_len);
  const double J = static_cast<double>(max_len);
  const double d = static_cast<double>(dim);
  for (std::size_t k = 1; k <= dim; ++k)
    for (std::size_t j = 1; j <= max_len; ++j) {
      const double jj = static_cast<double>(j);
      const double kk = static_cast<double>(k);
      l(k - 1, j - 1) = static_cast<T>((1.0 - jj / J) - (kk / d) * (1.0 - 2.0 * jj / J));
    }
  return l;
}

namespace {

template <typename T>
void check_position_input(std::span<const int> tokens, const Matrix<T>* weights,
                          std::size_t dim) {
  if (!weights) throw std::invalid_argument("embed_utterance: position mode needs weights");
  if (tokens.size() > weights->cols())
    throw std::invalid_argument("embed_utterance: utterance of " +
                                std::to_string(tokens.size()) +
                                " tokens exceeds maximum length " +
                                std::to_string(weights->cols()));
  if (weights->rows() != dim)
    throw std::invalid_argument("embed_utterance: weight/embedding dimension mismatch");
}

}  // namespace

template <typename T>
std::vector<T> embed_utterance(std::span<const int> tokens, const Matrix<T>& table,
                               EncodingMode mode, const Matrix<T>* weights) {
  if (tokens.empty()) throw std::invalid_argument("embed_utterance: empty utterance");
  const std::size_t dim = table.cols();
  std::vector<T> out(dim, T{0});
  if (mode == EncodingMode::bow) {
    for (int w : bow_vector(tokens, table.rows()).active) axpy<T>(T{1}, table.row(w), out);
    return out;
  }
  check_position_input(tokens, weights, dim);
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    const auto w = static_cast<std::size_t>(tokens[j]);
    if (w >= table.rows()) throw std::out_of_range("embed_utterance: token id out of range");
    const auto row = table.row(w);
    for (std::size_t k = 0; k < dim; ++k) out[k] += (*weights)(k, j) * row[k];
  }
  return out;
}

template <typename T>
void embed_utterance_backward(std::span<const int> tokens, std::span<const T> grad_embedding,
                              EncodingMode mode, const Matrix<T>* weights,
                              Matrix<T>& grad_table) {
  if (mode == EncodingMode::bow) {
    for (int w : bow_vector(tokens, grad_table.rows()).active)
      axpy<T>(T{1}, grad_embedding, grad_table.row(w));
    return;
  }
  check_position_input(tokens, weights, grad_table.cols());
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    auto row = grad_table.row(static_cast<std::size_t>(tokens[j]));
    for (std::size_t k = 0; k < row.size(); ++k) row[k] += (*weights)(k, j) * grad_embedding[k];
  }
}

template Matrix<float> position_weights<float>(std::size_t, std::size_t);
template Matrix<double> position_weights<double>(std::size_t, std::size_t);
template std::vector<float> embed_utterance<float>(std::span<const int>, const Matrix<float>&,
                                                   EncodingMode, const Matrix<float>*);
template std::vector<double> embed_utterance<double>(std::span<const int>, const Matrix<double>&,
                                                     EncodingMode, const Matrix<double>*);
template void embed_utterance_backward<float>(std::span<const int>, std::span<const float>,
                                              EncodingMode, const Matrix<float>*, Matrix<float>&);
template void embed_utterance_backward<double>(std::span<const int>, std::span<const double>,
                                               EncodingMode, const Matrix<double>*,
                                               Matrix<double>&);

}  // namespace memdialog
