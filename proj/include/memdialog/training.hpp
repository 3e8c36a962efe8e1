#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "memdialog/corpus.hpp"
#include "memdialog/model.hpp"

namespace memdialog {

struct TrainConfig {
  int task = 1;
  ModelConfig model;
  double learning_rate = 0.0058;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  std::size_t eval_every = 5;
  std::uint64_t seed = 1;
  std::size_t runs = 1;
  std::size_t dummy_candidates = 0;

  /// candidates: lr 0.0058, d 44, N 1, evaluated every 5 epochs.
  /// wordbyword: lr 0.0022, d 59, N 3, H 50, m 1, evaluated every epoch.
  static TrainConfig defaults_for(NlgKind nlg);
  /// Throws std::invalid_argument on non-positive sizes or when eval_every
  /// does not divide epochs.
  void validate() const;
};

struct EvalPoint {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;  // per-response, in [0, 1]
  friend bool operator==(const EvalPoint&, const EvalPoint&) = default;
};

struct TrainResult {
  DialogModel<float> model;  // parameters of the best validation epoch
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
  std::vector<EvalPoint> history;
  double seconds = 0.0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Builds vocabulary, preprocessing sizes and a freshly initialised model
/// from the training dialogs. Adds `config.dummy_candidates` synthetic
/// candidates and appends missing gold responses for the candidate head.
DialogModel<float> initialise_model(const TrainConfig& config, std::span<const Dialog> train,
                                    CandidateSet candidates, std::uint64_t seed);

/// Encodes every subdialog of `dialogs` against the model.
std::vector<EncodedExample> encode_dialogs(const DialogModel<float>& model,
                                           std::span<const Dialog> dialogs);

/// Fraction of examples whose predicted response equals the gold tokens.
double encoded_accuracy(const DialogModel<float>& model, std::span<const EncodedExample> examples);

/// Mean loss over a dataset, batched like training.
double dataset_loss(const DialogModel<float>& model, std::span<const EncodedExample> examples,
                    std::size_t batch_size);

struct TrainHooks {
  std::function<void(const EvalPoint&)> on_eval;
  std::function<void(std::size_t epoch, double loss)> on_epoch;
};

/// Runs one training run from an initialised model: seeded shuffle each
/// epoch, mini-batch Adam, validation every `eval_every` epochs; returns the
/// best validation state (ties keep the earlier epoch).
TrainResult train_model(const TrainConfig& config, DialogModel<float> model,
                        std::span<const EncodedExample> train_set,
                        std::span<const EncodedExample> val_set, std::uint64_t seed,
                        const TrainHooks& hooks = {});

/// initialise_model + encode + train_model for one seed.
TrainResult train(const TrainConfig& config, std::span<const Dialog> train_dialogs,
                  std::span<const Dialog> val_dialogs, const CandidateSet& candidates,
                  std::uint64_t seed, const TrainHooks& hooks = {});

/// `config.runs` independent runs with seeds seed, seed+1, ...
std::vector<TrainResult> train_runs(const TrainConfig& config, std::span<const Dialog> train_dialogs,
                                    std::span<const Dialog> val_dialogs,
                                    const CandidateSet& candidates, const TrainHooks& hooks = {});

/// Index of the run with the highest validation accuracy (earliest on ties).
std::size_t best_run(std::span<const TrainResult> runs);

}  // namespace memdialog
