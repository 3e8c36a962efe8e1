#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memdialog/corpus.hpp"
#include "memdialog/encoding.hpp"
#include "memdialog/memnet.hpp"
#include "memdialog/nlg.hpp"
#include "memdialog/numerics.hpp"

namespace memdialog {

struct ModelConfig {
  NlgKind nlg = NlgKind::candidates;
  EncodingMode encoding = EncodingMode::position;
  std::size_t dim = 44;
  std::size_t hops = 1;
  std::size_t hidden = 50;
  std::size_t context_words = 1;
  Activation activation = Activation::tanh;
  bool hidden_bias = false;
  bool untied_embeddings = false;
  bool query_bow_override = false;
  bool time_on_query = false;
  // Memory Network weights (A, R, W) ~ N(init_mean, init_std); decoder
  // weights ~ U(-decoder_init_range, decoder_init_range).
  double init_mean = 1.0;
  double init_std = 0.1;
  double decoder_init_range = 1.0;

  /// candidates: d 44, N 1. wordbyword: d 59, N 3, H 50, m 1.
  static ModelConfig defaults_for(NlgKind nlg);
};

/// Corpus-derived sizes fixed at training time.
struct Preprocessing {
  std::size_t time_keywords = 1;       // t
  std::size_t max_utterance_len = 1;   // J
  std::size_t max_response_len = 6;    // decoder max_len
};

/// t = longest history, J = longest utterance after temporal keywords,
/// max_len = longest response + 5, all over the given (training) subdialogs.
Preprocessing derive_preprocessing(std::span<const Subdialog> train, bool time_on_query);

struct EncodedExample {
  static constexpr std::size_t no_candidate = std::numeric_limits<std::size_t>::max();
  std::vector<std::vector<int>> memory;
  std::vector<int> query;
  std::vector<int> gold;
  bool gold_known = true;
  std::size_t gold_candidate = no_candidate;
};

template <typename T>
struct NamedTensor {
  std::string name;
  Matrix<T>* tensor;
};

template <typename T>
struct ConstNamedTensor {
  std::string name;
  const Matrix<T>* tensor;
};

template <typename T>
struct ModelParams {
  MemNetParams<T> memnet;
  Matrix<T> candidate_projection;  // W, V x d; empty for the word-by-word head
  DecoderParams<T> decoder;        // empty for the candidate head

  /// Non-empty tensors in a fixed order with stable names.
  std::vector<NamedTensor<T>> tensors();
  std::vector<ConstNamedTensor<T>> tensors() const;
  ModelParams zeros_like() const;
  void set_zero();
  std::size_t element_count() const;
};

template <typename T>
struct Prediction {
  std::vector<int> ids;
  Tokens response;
  std::optional<std::size_t> candidate;
  AttentionTrace<T> attention;
};

/// Memory Network encoder plus the configured response head.
template <typename T>
class DialogModel {
 public:
  DialogModel(ModelConfig config, Vocabulary vocab, CandidateSet candidates, Preprocessing pre,
              std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  const CandidateSet& candidates() const { return candidates_; }
  const Preprocessing& preprocessing() const { return pre_; }
  const Matrix<T>& position_weights() const { return weights_; }
  const CandidateHead<T>& candidate_head() const { return candidate_head_; }
  DecoderShape decoder_shape() const;

  ModelParams<T>& params() { return params_; }
  const ModelParams<T>& params() const { return params_; }
  /// Rebuilds derived caches (candidate encodings); call after editing params.
  void refresh();

  EncodedExample encode(const Subdialog& sd, std::vector<std::string>* unknown_words = nullptr) const;
  EncodedExample encode(std::span<const Utterance> history, std::span<const std::string> query,
                        std::vector<std::string>* unknown_words = nullptr) const;

  MemNetTrace<T> encode_dialog_state(const EncodedExample& ex) const;
  Prediction<T> predict(const EncodedExample& ex) const;
  Tokens respond(const Subdialog& sd) const;

  /// Mean loss: per example for the candidate head, per token position for
  /// the word-by-word head.
  T loss(std::span<const EncodedExample> batch) const;
  /// Same loss; overwrites `grads` with its gradient.
  T loss_and_gradient(std::span<const EncodedExample> batch, ModelParams<T>& grads) const;

  template <typename U>
  DialogModel<U> cast() const;

 private:
  template <typename>
  friend class DialogModel;
  DialogModel(ModelConfig config, Vocabulary vocab, CandidateSet candidates, Preprocessing pre);
  EncodingContext<T> encoding_context() const;
  std::vector<int> encode_utterance(std::span<const std::string> tokens,
                                    std::vector<std::string>* unknown_words) const;
  void build_heads();

  ModelConfig config_;
  Vocabulary vocab_;
  CandidateSet candidates_;
  Preprocessing pre_;
  Matrix<T> weights_;
  ModelParams<T> params_;
  CandidateHead<T> candidate_head_;
};

}  // namespace memdialog
