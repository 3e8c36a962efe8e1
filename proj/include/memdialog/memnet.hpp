#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "memdialog/encoding.hpp"
#include "memdialog/numerics.hpp"

namespace memdialog {

/// Memory Network weights. `embeddings` holds one V x d table when tied
/// (memory and query share A across hops) or one per hop when untied, in which
/// case the query uses the first table. `hop_outputs` holds R_h (d x d).
template <typename T>
struct MemNetParams {
  std::vector<Matrix<T>> embeddings;
  std::vector<Matrix<T>> hop_outputs;

  std::size_t hops() const { return hop_outputs.size(); }
  std::size_t dim() const { return embeddings.empty() ? 0 : embeddings.front().cols(); }
  const Matrix<T>& embedding_for_hop(std::size_t h) const {
    return embeddings.size() == 1 ? embeddings.front() : embeddings.at(h);
  }
  Matrix<T>& embedding_for_hop(std::size_t h) {
    return embeddings.size() == 1 ? embeddings.front() : embeddings.at(h);
  }
};

/// Encoding choice for one forward pass. `weights` is the d x J position
/// matrix (unused in bow mode).
template <typename T>
struct EncodingContext {
  EncodingMode memory_mode = EncodingMode::bow;
  EncodingMode query_mode = EncodingMode::bow;
  const Matrix<T>* weights = nullptr;
};

template <typename T>
std::vector<std::vector<T>> embed_memory(std::span<const std::vector<int>> history,
                                         const Matrix<T>& table, EncodingMode mode,
                                         const Matrix<T>* weights);

template <typename T>
struct HopResult {
  std::vector<T> output;     // o = R sum_i p_i m_i
  std::vector<T> relevance;  // p
  std::vector<T> read;       // sum_i p_i m_i
};

/// One attention hop. Empty memory yields o = 0 and an empty p.
template <typename T>
HopResult<T> hop(std::span<const T> query, const std::vector<std::vector<T>>& memory,
                 const Matrix<T>& hop_output);

/// Relevance vectors per hop.
template <typename T>
using AttentionTrace = std::vector<std::vector<T>>;

/// Everything backward() needs from a forward pass.
template <typename T>
struct MemNetTrace {
  std::vector<std::vector<T>> queries;                  // q_1 .. q_{N+1}
  std::vector<std::vector<std::vector<T>>> memories;    // per hop (shared when tied)
  std::vector<HopResult<T>> hops;

  const std::vector<T>& output() const { return queries.back(); }
  AttentionTrace<T> attention() const;
};

template <typename T>
MemNetTrace<T> memnet_forward(std::span<const std::vector<int>> history,
                              std::span<const int> query, const MemNetParams<T>& params,
                              const EncodingContext<T>& enc);

/// Accumulates parameter gradients given d(loss)/d(q_{N+1}).
template <typename T>
void memnet_backward(std::span<const std::vector<int>> history, std::span<const int> query,
                     const MemNetParams<T>& params, const EncodingContext<T>& enc,
                     const MemNetTrace<T>& trace, std::span<const T> grad_output,
                     MemNetParams<T>& grads);

}  // namespace memdialog
