#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace memdialog {

/// Dense row-major matrix. Vectors are plain std::vector<T> / std::span<T>.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

  /// Appends zero-initialised rows (used when a vocabulary grows).
  void append_rows(std::size_t n) { values_.resize((rows_ + n) * cols_, T{0}); rows_ += n; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  template <typename U>
  Matrix<U> cast() const {
    Matrix<U> out(rows_, cols_);
    auto dst = out.values();
    for (std::size_t i = 0; i < values_.size(); ++i) dst[i] = static_cast<U>(values_[i]);
    return out;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> values_;
};

template <typename T>
inline T dot(std::span<const T> a, std::span<const T> b) {
  T s{0};
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// y += alpha * x
template <typename T>
inline void axpy(T alpha, std::span<const T> x, std::span<T> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

/// y = M x
template <typename T>
inline void matvec(const Matrix<T>& m, std::span<const T> x, std::span<T> y) {
  for (std::size_t r = 0; r < m.rows(); ++r) y[r] = dot<T>(m.row(r), x);
}

/// y += M^T x
template <typename T>
inline void matvec_transposed_acc(const Matrix<T>& m, std::span<const T> x, std::span<T> y) {
  for (std::size_t r = 0; r < m.rows(); ++r) axpy<T>(x[r], m.row(r), y);
}

/// M += a b^T
template <typename T>
inline void add_outer(Matrix<T>& m, std::span<const T> a, std::span<const T> b) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    if (a[r] != T{0}) axpy<T>(a[r], b, m.row(r));
}

template <typename T>
bool all_finite(std::span<const T> v);

/// Numerically stable softmax (max subtraction). Throws on empty input.
template <typename T>
std::vector<T> softmax(std::span<const T> logits);

/// -ln(max(probs[target], 1e-12)).
template <typename T>
T cross_entropy(std::span<const T> probs, std::size_t target);

/// Index of the largest value; ties resolve to the lowest index.
template <typename T>
std::size_t argmax(std::span<const T> v);

// ---------------------------------------------------------------------------
// Random initialisation

/// splitmix64-derived seed for an independent per-tensor stream.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

/// mt19937_64 with explicit uniform/normal transforms so that draws do not
/// depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next_u64();
  double uniform01();  // [0, 1) with 53 random bits
  double uniform(double lo, double hi);
  double normal(double mean, double stddev);  // Box-Muller
  std::size_t below(std::size_t n);           // uniform integer in [0, n)

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

template <typename T>
Matrix<T> init_uniform(std::size_t rows, std::size_t cols, double lo, double hi,
                       std::uint64_t seed);

template <typename T>
Matrix<T> init_normal(std::size_t rows, std::size_t cols, double mean, double stddev,
                      std::uint64_t seed);

// ---------------------------------------------------------------------------
// Adam

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  AdamHyper hyper;
  std::vector<Matrix<T>> first_moment;
  std::vector<Matrix<T>> second_moment;
  std::int64_t step = 0;
};

/// One bias-corrected Adam update. Moment tensors are created on the first
/// call; later calls must pass tensors of the same shapes in the same order.
template <typename T>
void adam_step(std::span<Matrix<T>* const> params, std::span<const Matrix<T>* const> grads,
               AdamState<T>& state, double lr);

// ---------------------------------------------------------------------------
// Finite differences

/// Central-difference gradient of `loss` with respect to `params`, perturbing
/// one coordinate at a time in place (restored afterwards).
std::vector<double> finite_diff_grad(const std::function<double()>& loss,
                                     std::span<double> params, double epsilon = 1e-4);

}  // namespace memdialog
