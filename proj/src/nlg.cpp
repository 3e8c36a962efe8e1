#include "memdialog/nlg.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace memdialog {

std::string_view to_string(NlgKind k) {
  return k == NlgKind::candidates ? "candidates" : "wordbyword";
}

NlgKind parse_nlg(std::string_view s) {
  if (s == "candidates") return NlgKind::candidates;
  if (s == "wordbyword") return NlgKind::word_by_word;
  throw std::invalid_argument("unknown nlg '" + std::string(s) +
                              "' (expected candidates or wordbyword)");
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::relu: return "relu";
  }
  return "?";
}

Activation parse_activation(std::string_view s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "relu") return Activation::relu;
  throw std::invalid_argument("unknown activation '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------

template <typename T>
CandidateHead<T>::CandidateHead(std::span<const std::vector<int>> candidates,
                                std::size_t vocab_size) {
  bows_.reserve(candidates.size());
  for (const auto& c : candidates) bows_.push_back(bow_vector(c, vocab_size));
}

template <typename T>
void CandidateHead<T>::refresh(const Matrix<T>& projection) {
  encoded_ = Matrix<T>(bows_.size(), projection.cols());
  for (std::size_t i = 0; i < bows_.size(); ++i) {
    auto row = encoded_.row(i);
    for (int w : bows_[i].active) axpy<T>(T{1}, projection.row(w), row);
  }
}

template <typename T>
CandidateScores<T> CandidateHead<T>::score(std::span<const T> q) const {
  if (bows_.empty()) throw std::invalid_argument("score_candidates: empty candidate set");
  if (encoded_.rows() != bows_.size())
    throw std::logic_error("score_candidates: candidate encodings not refreshed");
  std::vector<T> logits(bows_.size());
  matvec<T>(encoded_, q, logits);
  CandidateScores<T> out;
  out.predicted = argmax<T>(logits);
  out.probs = softmax<T>(logits);
  return out;
}

template <typename T>
T CandidateHead<T>::loss(std::span<const T> q, std::size_t gold) const {
  return cross_entropy<T>(score(q).probs, gold);
}

template <typename T>
T CandidateHead<T>::loss_backward(std::span<const T> q, std::size_t gold, T weight,
                                  Matrix<T>& grad_projection, std::span<T> grad_q) const {
  auto scores = score(q);
  const T loss = cross_entropy<T>(scores.probs, gold);
  std::vector<T> grad_logits = std::move(scores.probs);
  grad_logits[gold] -= T{1};
  for (T& g : grad_logits) g *= weight;

  matvec_transposed_acc<T>(encoded_, grad_logits, grad_q);
  // d/dW[w] = (sum over candidates containing w of grad_logit) * q
  std::vector<T> per_word(grad_projection.rows(), T{0});
  for (std::size_t i = 0; i < bows_.size(); ++i)
    for (int w : bows_[i].active) per_word[w] += grad_logits[i];
  add_outer<T>(grad_projection, per_word, q);
  return loss;
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
T activate(Activation a, T x) {
  switch (a) {
    case Activation::tanh: return std::tanh(x);
    case Activation::sigmoid: return T{1} / (T{1} + std::exp(-x));
    case Activation::relu: return x > T{0} ? x : T{0};
  }
  return x;
}

// Derivative expressed through the activation output y.
template <typename T>
T activation_slope(Activation a, T y) {
  switch (a) {
    case Activation::tanh: return T{1} - y * y;
    case Activation::sigmoid: return y * (T{1} - y);
    case Activation::relu: return y > T{0} ? T{1} : T{0};
  }
  return T{1};
}

}  // namespace

std::vector<int> context_window(std::span<const int> emitted, const DecoderShape& shape) {
  std::vector<int> ctx(shape.context_words, shape.start_context);
  for (std::size_t k = 0; k < shape.context_words && k < emitted.size(); ++k)
    ctx[k] = emitted[emitted.size() - 1 - k];
  return ctx;
}

template <typename T>
DecoderStep<T> decoder_step(std::span<const T> q, std::span<const int> context,
                            const DecoderParams<T>& params, const DecoderShape& shape) {
  const std::size_t dim = params.embeddings.cols();
  const std::size_t vocab = params.embeddings.rows();
  if (context.size() != shape.context_words)
    throw std::invalid_argument("decoder_step: context length differs from m");
  DecoderStep<T> step;
  step.input.resize(shape.context_words * dim);
  for (std::size_t k = 0; k < context.size(); ++k) {
    if (context[k] < 0 || static_cast<std::size_t>(context[k]) >= vocab)
      throw std::out_of_range("decoder_step: context id out of range");
    const auto row = params.embeddings.row(static_cast<std::size_t>(context[k]));
    std::copy(row.begin(), row.end(), step.input.begin() + static_cast<std::ptrdiff_t>(k * dim));
  }

  std::vector<T> pre(shape.hidden);
  matvec<T>(params.hidden_from_query, q, pre);
  for (std::size_t r = 0; r < shape.hidden; ++r) {
    pre[r] += dot<T>(params.hidden_from_context.row(r), step.input);
    if (!params.hidden_bias.empty()) pre[r] += params.hidden_bias(r, 0);
  }
  step.hidden.resize(shape.hidden);
  for (std::size_t r = 0; r < shape.hidden; ++r)
    step.hidden[r] = activate(shape.activation, pre[r]);

  std::vector<T> logits(vocab);
  matvec<T>(params.output_weights, step.hidden, logits);
  for (std::size_t v = 0; v < vocab; ++v) logits[v] += params.output_bias(v, 0);
  step.probs = softmax<T>(logits);
  return step;
}

template <typename T>
std::vector<int> decode_greedy(std::span<const T> q, const DecoderParams<T>& params,
                               const DecoderShape& shape, std::size_t max_len,
                               DecodeTrace* trace) {
  if (max_len == 0) throw std::invalid_argument("decode_greedy: max_len must be >= 1");
  std::vector<int> emitted;
  while (emitted.size() < max_len) {
    const auto ctx = context_window(emitted, shape);
    if (trace) trace->contexts.push_back(ctx);
    const auto step = decoder_step<T>(q, ctx, params, shape);
    const int next = static_cast<int>(argmax<T>(step.probs));
    if (next == shape.end_of_response) break;
    emitted.push_back(next);
  }
  return emitted;
}

namespace {

void check_gold(std::span<const int> gold, std::size_t vocab) {
  for (int g : gold)
    if (g < 0 || static_cast<std::size_t>(g) >= vocab)
      throw std::out_of_range("teacher_forced_loss: gold token id " + std::to_string(g) +
                              " is not in the vocabulary");
}

}  // namespace

template <typename T>
T teacher_forced_loss(std::span<const T> q, std::span<const int> gold,
                      const DecoderParams<T>& params, const DecoderShape& shape) {
  check_gold(gold, params.embeddings.rows());
  T total{0};
  for (std::size_t pos = 0; pos <= gold.size(); ++pos) {
    const auto ctx = context_window(gold.first(pos), shape);
    const auto step = decoder_step<T>(q, ctx, params, shape);
    const int target = pos < gold.size() ? gold[pos] : shape.end_of_response;
    total += cross_entropy<T>(step.probs, static_cast<std::size_t>(target));
  }
  return total;
}

template <typename T>
T teacher_forced_backward(std::span<const T> q, std::span<const int> gold,
                          const DecoderParams<T>& params, const DecoderShape& shape, T weight,
                          DecoderParams<T>& grads, std::span<T> grad_q) {
  check_gold(gold, params.embeddings.rows());
  const std::size_t dim = params.embeddings.cols();
  T total{0};
  std::vector<T> grad_hidden(shape.hidden);
  std::vector<T> grad_input(shape.context_words * dim);
  for (std::size_t pos = 0; pos <= gold.size(); ++pos) {
    const auto ctx = context_window(gold.first(pos), shape);
    auto step = decoder_step<T>(q, ctx, params, shape);
    const int target = pos < gold.size() ? gold[pos] : shape.end_of_response;
    total += cross_entropy<T>(step.probs, static_cast<std::size_t>(target));

    std::vector<T>& grad_logits = step.probs;
    grad_logits[static_cast<std::size_t>(target)] -= T{1};
    for (T& g : grad_logits) g *= weight;

    for (std::size_t v = 0; v < grad_logits.size(); ++v) grads.output_bias(v, 0) += grad_logits[v];
    add_outer<T>(grads.output_weights, grad_logits, step.hidden);

    std::fill(grad_hidden.begin(), grad_hidden.end(), T{0});
    matvec_transposed_acc<T>(params.output_weights, grad_logits, grad_hidden);
    for (std::size_t r = 0; r < shape.hidden; ++r)
      grad_hidden[r] *= activation_slope(shape.activation, step.hidden[r]);

    if (!grads.hidden_bias.empty())
      for (std::size_t r = 0; r < shape.hidden; ++r) grads.hidden_bias(r, 0) += grad_hidden[r];
    add_outer<T>(grads.hidden_from_query, grad_hidden, q);
    add_outer<T>(grads.hidden_from_context, grad_hidden, step.input);
    matvec_transposed_acc<T>(params.hidden_from_query, grad_hidden, grad_q);

    std::fill(grad_input.begin(), grad_input.end(), T{0});
    matvec_transposed_acc<T>(params.hidden_from_context, grad_hidden, grad_input);
    for (std::size_t k = 0; k < ctx.size(); ++k)
      axpy<T>(T{1}, std::span<const T>(grad_input).subspan(k * dim, dim),
              grads.embeddings.row(static_cast<std::size_t>(ctx[k])));
  }
  return total;
}

#define MEMDIALOG_INSTANTIATE(T)                                                               \
  template class CandidateHead<T>;                                                             \
  template DecoderStep<T> decoder_step<T>(std::span<const T>, std::span<const int>,            \
                                          const DecoderParams<T>&, const DecoderShape&);       \
  template std::vector<int> decode_greedy<T>(std::span<const T>, const DecoderParams<T>&,      \
                                             const DecoderShape&, std::size_t, DecodeTrace*);  \
  template T teacher_forced_loss<T>(std::span<const T>, std::span<const int>,                  \
                                    const DecoderParams<T>&, const DecoderShape&);             \
  template T teacher_forced_backward<T>(std::span<const T>, std::span<const int>,              \
                                        const DecoderParams<T>&, const DecoderShape&, T,       \
                                        DecoderParams<T>&, std::span<T>);

MEMDIALOG_INSTANTIATE(float)
MEMDIALOG_INSTANTIATE(double)

#undef MEMDIALOG_INSTANTIATE

}  // namespace memdialog
