#include "memdialog/numerics.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace memdialog {

template <typename T>
bool all_finite(std::span<const T> v) {
  for (T x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty input");
  const T peak = *std::max_element(logits.begin(), logits.end());
  std::vector<T> out(logits.size());
  T total{0};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (T& p : out) p /= total;
  return out;
}

template <typename T>
T cross_entropy(std::span<const T> probs, std::size_t target) {
  if (target >= probs.size())
    throw std::out_of_range("cross_entropy: target " + std::to_string(target) +
                            " out of range for " + std::to_string(probs.size()) + " classes");
  constexpr T floor = static_cast<T>(1e-12);
  return -std::log(std::max(probs[target], floor));
}

template <typename T>
std::size_t argmax(std::span<const T> v) {
  if (v.empty()) throw std::invalid_argument("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : stream) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (h | 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double Rng::normal(double mean, double stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + stddev * spare_;
  }
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return mean + stddev * radius * std::cos(angle);
}

std::size_t Rng::below(std::size_t n) {
  // Lemire-style rejection to avoid modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return static_cast<std::size_t>(x % n);
}

template <typename T>
Matrix<T> init_uniform(std::size_t rows, std::size_t cols, double lo, double hi,
                       std::uint64_t seed) {
  if (!(lo < hi)) throw std::invalid_argument("init_uniform: requires lo < hi");
  Rng rng(seed);
  Matrix<T> m(rows, cols);
  for (T& v : m.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return m;
}

template <typename T>
Matrix<T> init_normal(std::size_t rows, std::size_t cols, double mean, double stddev,
                      std::uint64_t seed) {
  if (!(stddev > 0.0)) throw std::invalid_argument("init_normal: requires stddev > 0");
  Rng rng(seed);
  Matrix<T> m(rows, cols);
  for (T& v : m.values()) v = static_cast<T>(rng.normal(mean, stddev));
  return m;
}

template <typename T>
void adam_step(std::span<Matrix<T>* const> params, std::span<const Matrix<T>* const> grads,
               AdamState<T>& state, double lr) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (!params[i]->same_shape(*grads[i]))
      throw std::invalid_argument("adam_step: shape mismatch at tensor " + std::to_string(i));

  if (state.step == 0) {
    state.first_moment.clear();
    state.second_moment.clear();
    for (const Matrix<T>* p : params) {
      state.first_moment.emplace_back(p->rows(), p->cols());
      state.second_moment.emplace_back(p->rows(), p->cols());
    }
  } else if (state.first_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: tensor count changed between steps");
  }
  for (std::size_t i = 0; i < params.size(); ++i)
    if (!state.first_moment[i].same_shape(*params[i]))
      throw std::invalid_argument("adam_step: moment shape mismatch at tensor " +
                                  std::to_string(i));

  ++state.step;
  const double b1 = state.hyper.beta1;
  const double b2 = state.hyper.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->values();
    auto g = grads[i]->values();
    auto m = state.first_moment[i].values();
    auto v = state.second_moment[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k];
      const double mk = b1 * m[k] + (1.0 - b1) * gk;
      const double vk = b2 * v[k] + (1.0 - b2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double m_hat = mk / correction1;
      const double v_hat = vk / correction2;
      p[k] = static_cast<T>(p[k] - lr * m_hat / (std::sqrt(v_hat) + state.hyper.epsilon));
    }
  }
}

std::vector<double> finite_diff_grad(const std::function<double()>& loss,
                                     std::span<double> params, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("finite_diff_grad: epsilon must be > 0");
  std::vector<double> grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + epsilon;
    const double up = loss();
    params[i] = saved - epsilon;
    const double down = loss();
    params[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw std::runtime_error("finite_diff_grad: non-finite loss at coordinate " +
                               std::to_string(i));
    grad[i] = (up - down) / (2.0 * epsilon);
  }
  return grad;
}

#define MEMDIALOG_INSTANTIATE(T)                                                            \
  template bool all_finite<T>(std::span<const T>);                                          \
  template std::vector<T> softmax<T>(std::span<const T>);                                   \
  template T cross_entropy<T>(std::span<const T>, std::size_t);                             \
  template std::size_t argmax<T>(std::span<const T>);                                       \
  template Matrix<T> init_uniform<T>(std::size_t, std::size_t, double, double,              \
                                     std::uint64_t);                                        \
  template Matrix<T> init_normal<T>(std::size_t, std::size_t, double, double,               \
                                    std::uint64_t);                                         \
  template void adam_step<T>(std::span<Matrix<T>* const>, std::span<const Matrix<T>* const>, \
                             AdamState<T>&, double);

MEMDIALOG_INSTANTIATE(float)
MEMDIALOG_INSTANTIATE(double)

#undef MEMDIALOG_INSTANTIATE

}  // namespace memdialog
