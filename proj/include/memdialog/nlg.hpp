#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "memdialog/encoding.hpp"
#include "memdialog/numerics.hpp"

namespace memdialog {

enum class NlgKind { candidates, word_by_word };
std::string_view to_string(NlgKind k);
NlgKind parse_nlg(std::string_view s);

// ---------------------------------------------------------------------------
// Candidate selection

template <typename T>
struct CandidateScores {
  std::vector<T> probs;  // softmax over candidates
  std::size_t predicted = 0;
};

/// Scores q^T W Phi(y_i) for a fixed candidate list. W is stored as a V x d
/// table (row w = column W[:, w]). The products W Phi(y_i) are cached in a
/// C x d matrix; call refresh() whenever W changes.
template <typename T>
class CandidateHead {
 public:
  CandidateHead() = default;
  /// `candidates` are vocabulary ids per response (BOW encoded internally).
  CandidateHead(std::span<const std::vector<int>> candidates, std::size_t vocab_size);

  std::size_t size() const { return bows_.size(); }
  const std::vector<BowVector>& bows() const { return bows_; }
  void refresh(const Matrix<T>& projection);
  const Matrix<T>& encoded() const { return encoded_; }

  /// Throws if there are no candidates.
  CandidateScores<T> score(std::span<const T> q) const;

  /// Cross-entropy of the gold candidate; accumulates d/dW and d/dq scaled by
  /// `weight`. Returns the unscaled loss.
  T loss_backward(std::span<const T> q, std::size_t gold, T weight, Matrix<T>& grad_projection,
                  std::span<T> grad_q) const;
  T loss(std::span<const T> q, std::size_t gold) const;

 private:
  std::vector<BowVector> bows_;
  Matrix<T> encoded_;
};

// ---------------------------------------------------------------------------
// Word-by-word decoder

enum class Activation { tanh, sigmoid, relu };
std::string_view to_string(Activation a);
Activation parse_activation(std::string_view s);

template <typename T>
struct DecoderParams {
  Matrix<T> embeddings;           // E: V x d (row per word)
  Matrix<T> hidden_from_query;    // U_q: H x d
  Matrix<T> hidden_from_context;  // U_w: H x (m d)
  Matrix<T> hidden_bias;          // H x 1, empty unless enabled
  Matrix<T> output_weights;       // O: V x H
  Matrix<T> output_bias;          // b: V x 1
};

struct DecoderShape {
  std::size_t context_words = 1;  // m
  std::size_t hidden = 50;        // H
  Activation activation = Activation::tanh;
  int start_context = -1;
  int end_of_response = -1;
};

template <typename T>
struct DecoderStep {
  std::vector<T> input;   // [E[c_1]; ...; E[c_m]]
  std::vector<T> hidden;  // activation output
  std::vector<T> probs;   // V
};

/// Context for the next step: the last m emitted ids, most recent first,
/// padded with START_CTX.
std::vector<int> context_window(std::span<const int> emitted, const DecoderShape& shape);

template <typename T>
DecoderStep<T> decoder_step(std::span<const T> q, std::span<const int> context,
                            const DecoderParams<T>& params, const DecoderShape& shape);

struct DecodeTrace {
  std::vector<std::vector<int>> contexts;
};

/// Greedy decoding; END_RESP terminates and is not emitted. Ties pick the
/// lowest id. When `trace` is given, records the context fed at every step.
template <typename T>
std::vector<int> decode_greedy(std::span<const T> q, const DecoderParams<T>& params,
                               const DecoderShape& shape, std::size_t max_len,
                               DecodeTrace* trace = nullptr);

/// Sum over len(gold)+1 positions of the step cross-entropy under teacher
/// forcing (the last target is END_RESP).
template <typename T>
T teacher_forced_loss(std::span<const T> q, std::span<const int> gold,
                      const DecoderParams<T>& params, const DecoderShape& shape);

/// Same loss; accumulates gradients scaled by `weight` into `grads` and
/// `grad_q`.
template <typename T>
T teacher_forced_backward(std::span<const T> q, std::span<const int> gold,
                          const DecoderParams<T>& params, const DecoderShape& shape, T weight,
                          DecoderParams<T>& grads, std::span<T> grad_q);

}  // namespace memdialog
