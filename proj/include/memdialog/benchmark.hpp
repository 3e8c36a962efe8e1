#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "memdialog/corpus.hpp"
#include "memdialog/model.hpp"

namespace memdialog {

/// Appends n unique synthetic responses to `set`. Response i is the token
/// "dummy" followed by one position-tagged digit token per decimal digit of i
/// ("dummy_p0_3", ...), at least five digits wide. Tokens are added to
/// `vocab` when given. n = 0 leaves both unchanged.
void gen_dummy_candidates(std::size_t n, CandidateSet& set, Vocabulary* vocab = nullptr);

/// Copy of a candidate-head model whose candidate set is padded with dummies
/// up to `target_size`. New vocabulary rows get seeded random weights; the
/// original rows are copied unchanged.
DialogModel<float> with_candidate_count(const DialogModel<float>& model, std::size_t target_size,
                                        std::uint64_t seed);

struct LatencyRow {
  std::size_t candidates = 0;
  std::size_t trials = 0;
  double median_us = 0.0;
  double p95_us = 0.0;
  double mean_us = 0.0;
};

struct LatencyReport {
  NlgKind head = NlgKind::candidates;
  std::string machine;
  std::vector<LatencyRow> rows;
};

/// Per-prediction wall clock (encode + memory network + head) for each
/// candidate-set size. The word-by-word head holds the padded candidate set
/// in memory but never reads it. Runs `warmup` untimed predictions first.
LatencyReport measure_prediction_latency(const DialogModel<float>& model,
                                         std::span<const Subdialog> probes,
                                         std::span<const std::size_t> candidate_counts,
                                         std::size_t trials, std::size_t warmup = 10);

/// Predictions per second with `threads` workers sharing one model.
double measure_throughput(const DialogModel<float>& model, std::span<const Subdialog> probes,
                          std::size_t threads, std::size_t predictions_per_thread);

struct SpaceReport {
  std::size_t parameter_bytes = 0;
  std::size_t candidate_bytes = 0;
};

/// Bytes of a float32 tensor block: 4 * elements plus its header.
std::size_t tensor_block_bytes(std::size_t rows, std::size_t cols, std::size_t name_length);

/// Parameter bytes (tensor blocks) and candidate-encoding bytes (cached
/// C x d encodings plus BOW index lists); the latter is 0 without a
/// candidate head.
SpaceReport measure_space(const DialogModel<float>& model);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};
LinearFit fit_line(std::span<const double> xs, std::span<const double> ys);

/// CPU model, core count and kernel.
std::string machine_descriptor();

/// FNV-1a over all parameter bytes.
std::uint64_t params_checksum(const DialogModel<float>& model);

}  // namespace memdialog
