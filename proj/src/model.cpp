#include "memdialog/model.hpp"

#include <algorithm>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace memdialog {

ModelConfig ModelConfig::defaults_for(NlgKind nlg) {
  ModelConfig c;
  c.nlg = nlg;
  if (nlg == NlgKind::candidates) {
    c.dim = 44;
    c.hops = 1;
  } else {
    c.dim = 59;
    c.hops = 3;
    c.hidden = 50;
    c.context_words = 1;
  }
  return c;
}

Preprocessing derive_preprocessing(std::span<const Subdialog> train, bool time_on_query) {
  Preprocessing p;
  std::size_t longest_history = 0;
  std::size_t longest_utterance = 1;
  std::size_t longest_response = 1;
  for (const auto& sd : train) {
    longest_history = std::max(longest_history, sd.history.size());
    for (const auto& u : sd.history)
      longest_utterance = std::max(longest_utterance, u.tokens.size() + 1);
    longest_utterance = std::max(longest_utterance, sd.query.size() + (time_on_query ? 1 : 0));
    longest_response = std::max(longest_response, sd.gold.size());
  }
  p.time_keywords = std::max<std::size_t>(1, longest_history);
  p.max_utterance_len = longest_utterance;
  p.max_response_len = longest_response + 5;
  return p;
}

// ---------------------------------------------------------------------------

template <typename T>
std::vector<NamedTensor<T>> ModelParams<T>::tensors() {
  std::vector<NamedTensor<T>> out;
  const auto add = [&out](std::string name, Matrix<T>& m) {
    if (!m.empty()) out.push_back({std::move(name), &m});
  };
  for (std::size_t i = 0; i < memnet.embeddings.size(); ++i)
    add("memory.embedding." + std::to_string(i), memnet.embeddings[i]);
  for (std::size_t i = 0; i < memnet.hop_outputs.size(); ++i)
    add("memory.hop_output." + std::to_string(i), memnet.hop_outputs[i]);
  add("candidates.projection", candidate_projection);
  add("decoder.embedding", decoder.embeddings);
  add("decoder.hidden_from_query", decoder.hidden_from_query);
  add("decoder.hidden_from_context", decoder.hidden_from_context);
  add("decoder.hidden_bias", decoder.hidden_bias);
  add("decoder.output_weights", decoder.output_weights);
  add("decoder.output_bias", decoder.output_bias);
  return out;
}

template <typename T>
std::vector<ConstNamedTensor<T>> ModelParams<T>::tensors() const {
  std::vector<ConstNamedTensor<T>> out;
  for (auto& t : const_cast<ModelParams*>(this)->tensors()) out.push_back({t.name, t.tensor});
  return out;
}

template <typename T>
ModelParams<T> ModelParams<T>::zeros_like() const {
  ModelParams<T> z = *this;
  z.set_zero();
  return z;
}

template <typename T>
void ModelParams<T>::set_zero() {
  for (auto& t : tensors()) t.tensor->fill(T{0});
}

template <typename T>
std::size_t ModelParams<T>::element_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.tensor->size();
  return n;
}

// ---------------------------------------------------------------------------

template <typename T>
DialogModel<T>::DialogModel(ModelConfig config, Vocabulary vocab, CandidateSet candidates,
                            Preprocessing pre)
    : config_(config), vocab_(std::move(vocab)), candidates_(std::move(candidates)), pre_(pre) {
  if (config_.dim == 0 || config_.hops == 0)
    throw std::invalid_argument("model: dim and hops must be >= 1");
  if (config_.nlg == NlgKind::word_by_word && (config_.hidden == 0 || config_.context_words == 0))
    throw std::invalid_argument("model: hidden size and context words must be >= 1");
  if (config_.nlg == NlgKind::candidates && candidates_.empty())
    throw std::invalid_argument("model: candidate head needs at least one candidate");
  if (pre_.time_keywords != vocab_.time_keyword_count())
    throw std::invalid_argument("model: temporal keyword count differs from vocabulary");

  const std::size_t V = vocab_.size();
  const std::size_t d = config_.dim;
  weights_ = memdialog::position_weights<T>(pre_.max_utterance_len, d);

  const std::size_t tables = config_.untied_embeddings ? config_.hops : 1;
  params_.memnet.embeddings.assign(tables, Matrix<T>(V, d));
  params_.memnet.hop_outputs.assign(config_.hops, Matrix<T>(d, d));
  if (config_.nlg == NlgKind::candidates) {
    params_.candidate_projection = Matrix<T>(V, d);
  } else {
    const std::size_t H = config_.hidden;
    auto& dec = params_.decoder;
    dec.embeddings = Matrix<T>(V, d);
    dec.hidden_from_query = Matrix<T>(H, d);
    dec.hidden_from_context = Matrix<T>(H, config_.context_words * d);
    if (config_.hidden_bias) dec.hidden_bias = Matrix<T>(H, 1);
    dec.output_weights = Matrix<T>(V, H);
    dec.output_bias = Matrix<T>(V, 1);
  }
  build_heads();
}

template <typename T>
DialogModel<T>::DialogModel(ModelConfig config, Vocabulary vocab, CandidateSet candidates,
                            Preprocessing pre, std::uint64_t seed)
    : DialogModel(config, std::move(vocab), std::move(candidates), pre) {
  for (auto& t : params_.tensors()) {
    const auto stream = derive_seed(seed, t.name);
    if (t.name.starts_with("decoder."))
      *t.tensor = init_uniform<T>(t.tensor->rows(), t.tensor->cols(), -config_.decoder_init_range,
                                  config_.decoder_init_range, stream);
    else
      *t.tensor = init_normal<T>(t.tensor->rows(), t.tensor->cols(), config_.init_mean,
                                 config_.init_std, stream);
  }
  refresh();
}

template <typename T>
void DialogModel<T>::build_heads() {
  if (config_.nlg != NlgKind::candidates) return;
  std::vector<std::vector<int>> ids;
  ids.reserve(candidates_.size());
  for (const auto& r : candidates_.responses()) ids.push_back(vocab_.encode(r));
  candidate_head_ = CandidateHead<T>(ids, vocab_.size());
  refresh();
}

template <typename T>
void DialogModel<T>::refresh() {
  if (config_.nlg == NlgKind::candidates) candidate_head_.refresh(params_.candidate_projection);
}

template <typename T>
DecoderShape DialogModel<T>::decoder_shape() const {
  DecoderShape s;
  s.context_words = config_.context_words;
  s.hidden = config_.hidden;
  s.activation = config_.activation;
  s.start_context = vocab_.start_context();
  s.end_of_response = vocab_.end_of_response();
  return s;
}

template <typename T>
EncodingContext<T> DialogModel<T>::encoding_context() const {
  EncodingContext<T> enc;
  enc.memory_mode = config_.encoding;
  enc.query_mode = config_.query_bow_override ? EncodingMode::bow : config_.encoding;
  enc.weights = &weights_;
  return enc;
}

template <typename T>
std::vector<int> DialogModel<T>::encode_utterance(std::span<const std::string> tokens,
                                                  std::vector<std::string>* unknown_words) const {
  auto ids = vocab_.encode(tokens, unknown_words);
  if (ids.empty()) ids.push_back(vocab_.unknown());
  if (config_.encoding == EncodingMode::position && ids.size() > pre_.max_utterance_len) {
    spdlog::warn("utterance of {} tokens truncated to the maximum length {}", ids.size(),
                 pre_.max_utterance_len);
    ids.resize(pre_.max_utterance_len);
  }
  return ids;
}

template <typename T>
EncodedExample DialogModel<T>::encode(std::span<const Utterance> history,
                                      std::span<const std::string> query,
                                      std::vector<std::string>* unknown_words) const {
  EncodedExample ex;
  const std::size_t t = pre_.time_keywords;
  const auto timed = attach_time_keywords({history.begin(), history.end()}, t);
  ex.memory.reserve(timed.size());
  for (const auto& u : timed) ex.memory.push_back(encode_utterance(u.tokens, unknown_words));
  Tokens q(query.begin(), query.end());
  if (config_.time_on_query) q.push_back(time_keyword(std::min(history.size(), t - 1)));
  ex.query = encode_utterance(q, unknown_words);
  return ex;
}

template <typename T>
EncodedExample DialogModel<T>::encode(const Subdialog& sd,
                                      std::vector<std::string>* unknown_words) const {
  auto ex = encode(sd.history, sd.query, unknown_words);
  std::vector<std::string> unknown_gold;
  ex.gold = vocab_.encode(sd.gold, &unknown_gold);
  ex.gold_known = unknown_gold.empty();
  if (config_.nlg == NlgKind::candidates) {
    if (sd.gold_candidate) ex.gold_candidate = *sd.gold_candidate;
    else if (auto id = candidates_.find(sd.gold)) ex.gold_candidate = *id;
  }
  return ex;
}

template <typename T>
MemNetTrace<T> DialogModel<T>::encode_dialog_state(const EncodedExample& ex) const {
  return memnet_forward<T>(ex.memory, ex.query, params_.memnet, encoding_context());
}

template <typename T>
Prediction<T> DialogModel<T>::predict(const EncodedExample& ex) const {
  const auto trace = encode_dialog_state(ex);
  Prediction<T> p;
  p.attention = trace.attention();
  if (config_.nlg == NlgKind::candidates) {
    const auto scores = candidate_head_.score(trace.output());
    p.candidate = scores.predicted;
    p.response = candidates_.response(scores.predicted);
    p.ids = vocab_.encode(p.response);
  } else {
    p.ids = decode_greedy<T>(trace.output(), params_.decoder, decoder_shape(),
                             pre_.max_response_len);
    p.response = vocab_.decode(p.ids);
  }
  return p;
}

template <typename T>
Tokens DialogModel<T>::respond(const Subdialog& sd) const {
  return predict(encode(sd.history, sd.query)).response;
}

namespace {

template <typename T>
void require_trainable(const EncodedExample& ex, NlgKind nlg) {
  if (nlg == NlgKind::candidates) {
    if (ex.gold_candidate == EncodedExample::no_candidate)
      throw std::invalid_argument("loss: gold response is not in the candidate set");
  } else if (!ex.gold_known) {
    throw std::invalid_argument("loss: gold response contains a word outside the vocabulary");
  }
}

}  // namespace

template <typename T>
T DialogModel<T>::loss(std::span<const EncodedExample> batch) const {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  T total{0};
  std::size_t positions = 0;
  for (const auto& ex : batch) {
    require_trainable<T>(ex, config_.nlg);
    const auto trace = encode_dialog_state(ex);
    if (config_.nlg == NlgKind::candidates) {
      total += candidate_head_.loss(trace.output(), ex.gold_candidate);
      ++positions;
    } else {
      total += teacher_forced_loss<T>(trace.output(), ex.gold, params_.decoder, decoder_shape());
      positions += ex.gold.size() + 1;
    }
  }
  return total / static_cast<T>(positions);
}

template <typename T>
T DialogModel<T>::loss_and_gradient(std::span<const EncodedExample> batch,
                                    ModelParams<T>& grads) const {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  std::size_t positions = 0;
  for (const auto& ex : batch) {
    require_trainable<T>(ex, config_.nlg);
    positions += config_.nlg == NlgKind::candidates ? 1 : ex.gold.size() + 1;
  }
  const T weight = T{1} / static_cast<T>(positions);
  grads.set_zero();
  const auto enc = encoding_context();
  const auto shape = decoder_shape();
  T total{0};
  std::vector<T> grad_q(config_.dim);
  for (const auto& ex : batch) {
    const auto trace = memnet_forward<T>(ex.memory, ex.query, params_.memnet, enc);
    std::fill(grad_q.begin(), grad_q.end(), T{0});
    if (config_.nlg == NlgKind::candidates)
      total += candidate_head_.loss_backward(trace.output(), ex.gold_candidate, weight,
                                             grads.candidate_projection, grad_q);
    else
      total += teacher_forced_backward<T>(trace.output(), ex.gold, params_.decoder, shape, weight,
                                          grads.decoder, grad_q);
    memnet_backward<T>(ex.memory, ex.query, params_.memnet, enc, trace, grad_q, grads.memnet);
  }
  return total * weight;
}

template <typename T>
template <typename U>
DialogModel<U> DialogModel<T>::cast() const {
  DialogModel<U> out(config_, vocab_, candidates_, pre_);
  auto src = params_.tensors();
  auto dst = out.params_.tensors();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].tensor = src[i].tensor->template cast<U>();
  out.refresh();
  return out;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template class DialogModel<float>;
template class DialogModel<double>;
template DialogModel<double> DialogModel<float>::cast<double>() const;
template DialogModel<float> DialogModel<double>::cast<float>() const;
template DialogModel<float> DialogModel<float>::cast<float>() const;

}  // namespace memdialog
