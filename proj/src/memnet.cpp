#include "memdialog/memnet.hpp"

namespace memdialog {

template <typename T>
std::vector<std::vector<T>> embed_memory(std::span<const std::vector<int>> history,
                                         const Matrix<T>& table, EncodingMode mode,
                                         const Matrix<T>* weights) {
  std::vector<std::vector<T>> memory;
  memory.reserve(history.size());
  for (const auto& utterance : history)
    memory.push_back(embed_utterance<T>(utterance, table, mode, weights));
  return memory;
}

template <typename T>
HopResult<T> hop(std::span<const T> query, const std::vector<std::vector<T>>& memory,
                 const Matrix<T>& hop_output) {
  const std::size_t dim = query.size();
  HopResult<T> r;
  r.output.assign(dim, T{0});
  r.read.assign(dim, T{0});
  if (memory.empty()) return r;

  std::vector<T> scores(memory.size());
  for (std::size_t i = 0; i < memory.size(); ++i) scores[i] = dot<T>(query, memory[i]);
  r.relevance = softmax<T>(scores);
  for (std::size_t i = 0; i < memory.size(); ++i) axpy<T>(r.relevance[i], memory[i], r.read);
  matvec<T>(hop_output, r.read, r.output);
  return r;
}

template <typename T>
AttentionTrace<T> MemNetTrace<T>::attention() const {
  AttentionTrace<T> out;
  for (const auto& h : hops) out.push_back(h.relevance);
  return out;
}

template <typename T>
MemNetTrace<T> memnet_forward(std::span<const std::vector<int>> history,
                              std::span<const int> query, const MemNetParams<T>& params,
                              const EncodingContext<T>& enc) {
  MemNetTrace<T> trace;
  trace.queries.push_back(
      embed_utterance<T>(query, params.embeddings.front(), enc.query_mode, enc.weights));
  for (std::size_t h = 0; h < params.hops(); ++h) {
    if (h < params.embeddings.size())
      trace.memories.push_back(
          embed_memory<T>(history, params.embedding_for_hop(h), enc.memory_mode, enc.weights));
    const auto& memory = trace.memories.size() == 1 ? trace.memories.front() : trace.memories[h];
    trace.hops.push_back(hop<T>(trace.queries.back(), memory, params.hop_outputs[h]));
    std::vector<T> next = trace.queries.back();
    axpy<T>(T{1}, trace.hops.back().output, next);
    trace.queries.push_back(std::move(next));
  }
  return trace;
}

template <typename T>
void memnet_backward(std::span<const std::vector<int>> history, std::span<const int> query,
                     const MemNetParams<T>& params, const EncodingContext<T>& enc,
                     const MemNetTrace<T>& trace, std::span<const T> grad_output,
                     MemNetParams<T>& grads) {
  const std::size_t dim = params.dim();
  std::vector<T> grad_q(grad_output.begin(), grad_output.end());
  // d(loss)/d(m_i), per distinct memory set.
  std::vector<std::vector<std::vector<T>>> grad_memories(trace.memories.size());
  for (std::size_t s = 0; s < trace.memories.size(); ++s)
    grad_memories[s].assign(history.size(), std::vector<T>(dim, T{0}));

  for (std::size_t h = params.hops(); h-- > 0;) {
    const auto& result = trace.hops[h];
    const auto& q_in = trace.queries[h];
    const std::size_t set = trace.memories.size() == 1 ? 0 : h;
    const auto& memory = trace.memories[set];
    // q_{h+1} = q_h + R_h read_h
    add_outer<T>(grads.hop_outputs[h], grad_q, result.read);
    if (memory.empty()) continue;  // o = 0, q_h receives grad_q unchanged

    std::vector<T> grad_read(dim, T{0});
    matvec_transposed_acc<T>(params.hop_outputs[h], grad_q, grad_read);

    const auto& p = result.relevance;
    std::vector<T> grad_p(memory.size());
    T weighted{0};
    for (std::size_t i = 0; i < memory.size(); ++i) {
      grad_p[i] = dot<T>(grad_read, memory[i]);
      weighted += p[i] * grad_p[i];
    }
    std::vector<T> grad_q_in = grad_q;
    for (std::size_t i = 0; i < memory.size(); ++i) {
      const T grad_score = p[i] * (grad_p[i] - weighted);
      axpy<T>(grad_score, memory[i], grad_q_in);
      auto& gm = grad_memories[set][i];
      axpy<T>(p[i], grad_read, gm);
      axpy<T>(grad_score, q_in, gm);
    }
    grad_q = std::move(grad_q_in);
  }

  for (std::size_t s = 0; s < grad_memories.size(); ++s) {
    Matrix<T>& table = grads.embedding_for_hop(s);
    for (std::size_t i = 0; i < history.size(); ++i)
      embed_utterance_backward<T>(history[i], grad_memories[s][i], enc.memory_mode, enc.weights,
                                  table);
  }
  embed_utterance_backward<T>(query, grad_q, enc.query_mode, enc.weights,
                              grads.embeddings.front());
}

#define MEMDIALOG_INSTANTIATE(T)                                                              \
  template struct MemNetTrace<T>;                                                             \
  template std::vector<std::vector<T>> embed_memory<T>(std::span<const std::vector<int>>,     \
                                                       const Matrix<T>&, EncodingMode,        \
                                                       const Matrix<T>*);                     \
  template HopResult<T> hop<T>(std::span<const T>, const std::vector<std::vector<T>>&,        \
                               const Matrix<T>&);                                             \
  template MemNetTrace<T> memnet_forward<T>(std::span<const std::vector<int>>,                \
                                            std::span<const int>, const MemNetParams<T>&,     \
                                            const EncodingContext<T>&);                       \
  template void memnet_backward<T>(std::span<const std::vector<int>>, std::span<const int>,   \
                                   const MemNetParams<T>&, const EncodingContext<T>&,         \
                                   const MemNetTrace<T>&, std::span<const T>, MemNetParams<T>&);

MEMDIALOG_INSTANTIATE(float)
MEMDIALOG_INSTANTIATE(double)

#undef MEMDIALOG_INSTANTIATE

}  // namespace memdialog
