#include "memdialog/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include <spdlog/spdlog.h>

#include "memdialog/benchmark.hpp"

namespace memdialog {

TrainConfig TrainConfig::defaults_for(NlgKind nlg) {
  TrainConfig c;
  c.model = ModelConfig::defaults_for(nlg);
  if (nlg == NlgKind::candidates) {
    c.learning_rate = 0.0058;
    c.eval_every = 5;
  } else {
    c.learning_rate = 0.0022;
    c.eval_every = 1;
  }
  return c;
}

void TrainConfig::validate() const {
  if (task < 1 || task > 6) throw std::invalid_argument("task must be in 1..6");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (batch_size == 0 || epochs == 0 || eval_every == 0 || runs == 0)
    throw std::invalid_argument("batch size, epochs, eval_every and runs must be positive");
  if (epochs % eval_every != 0)
    throw std::invalid_argument("eval_every (" + std::to_string(eval_every) +
                                ") must divide epochs (" + std::to_string(epochs) + ")");
  if (model.dim == 0 || model.hops == 0 || model.hidden == 0 || model.context_words == 0)
    throw std::invalid_argument("dim, hops, hidden and context words must be positive");
}

DialogModel<float> initialise_model(const TrainConfig& config, std::span<const Dialog> train,
                                    CandidateSet candidates, std::uint64_t seed) {
  std::vector<Subdialog> subdialogs;
  for (const auto& d : train) {
    auto s = split_subdialogs(d);
    subdialogs.insert(subdialogs.end(), std::make_move_iterator(s.begin()),
                      std::make_move_iterator(s.end()));
  }
  if (subdialogs.empty()) throw std::invalid_argument("training set has no subdialogs");
  if (config.dummy_candidates > 0) gen_dummy_candidates(config.dummy_candidates, candidates);
  if (config.model.nlg == NlgKind::candidates) resolve_gold_candidates(subdialogs, candidates);

  const auto pre = derive_preprocessing(subdialogs, config.model.time_on_query);
  auto vocab = Vocabulary::build(train, &candidates, pre.time_keywords);
  if (config.model.nlg == NlgKind::word_by_word) candidates = CandidateSet{};
  return DialogModel<float>(config.model, std::move(vocab), std::move(candidates), pre, seed);
}

std::vector<EncodedExample> encode_dialogs(const DialogModel<float>& model,
                                           std::span<const Dialog> dialogs) {
  std::vector<EncodedExample> out;
  for (const auto& d : dialogs)
    for (const auto& sd : split_subdialogs(d)) out.push_back(model.encode(sd));
  return out;
}

double encoded_accuracy(const DialogModel<float>& model, std::span<const EncodedExample> examples) {
  if (examples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : examples)
    if (ex.gold_known && model.predict(ex).ids == ex.gold) ++correct;
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

double dataset_loss(const DialogModel<float>& model, std::span<const EncodedExample> examples,
                    std::size_t batch_size) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const auto batch = examples.subspan(start, std::min(batch_size, examples.size() - start));
    total += static_cast<double>(model.loss(batch)) * static_cast<double>(batch.size());
    count += batch.size();
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

TrainResult train_model(const TrainConfig& config, DialogModel<float> model,
                        std::span<const EncodedExample> train_set,
                        std::span<const EncodedExample> val_set, std::uint64_t seed,
                        const TrainHooks& hooks) {
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  if (val_set.empty()) throw std::invalid_argument("train: empty validation set");
  const auto started = std::chrono::steady_clock::now();

  auto grads = model.params().zeros_like();
  AdamState<float> adam;
  std::vector<Matrix<float>*> param_ptrs;
  std::vector<const Matrix<float>*> grad_ptrs;
  for (auto& t : model.params().tensors()) param_ptrs.push_back(t.tensor);
  for (auto& t : grads.tensors()) grad_ptrs.push_back(t.tensor);

  // Shuffled in place each epoch; batches are contiguous slices.
  std::vector<EncodedExample> examples(train_set.begin(), train_set.end());
  Rng shuffle_rng(derive_seed(seed, "shuffle"));

  TrainResult result{model, 0, -1.0, {}, 0.0};
  std::size_t batch_index = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = examples.size(); i > 1; --i)
      std::swap(examples[i - 1], examples[shuffle_rng.below(i)]);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < examples.size(); start += config.batch_size, ++batch_index) {
      const auto batch = std::span<const EncodedExample>(examples).subspan(
          start, std::min(config.batch_size, examples.size() - start));
      const float loss = model.loss_and_gradient(batch, grads);
      if (!std::isfinite(loss))
        throw TrainingError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_index));
      epoch_loss += static_cast<double>(loss) * static_cast<double>(batch.size());
      adam_step<float>(param_ptrs, grad_ptrs, adam, config.learning_rate);
      model.refresh();
    }
    epoch_loss /= static_cast<double>(examples.size());
    if (hooks.on_epoch) hooks.on_epoch(epoch, epoch_loss);

    if (epoch % config.eval_every == 0) {
      const EvalPoint point{epoch, epoch_loss, encoded_accuracy(model, val_set)};
      result.history.push_back(point);
      if (hooks.on_eval) hooks.on_eval(point);
      if (point.val_accuracy > result.best_val_accuracy) {
        result.best_val_accuracy = point.val_accuracy;
        result.best_epoch = epoch;
        result.model.params() = model.params();
        result.model.refresh();
      }
    }
  }
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

TrainResult train(const TrainConfig& config, std::span<const Dialog> train_dialogs,
                  std::span<const Dialog> val_dialogs, const CandidateSet& candidates,
                  std::uint64_t seed, const TrainHooks& hooks) {
  config.validate();
  auto model = initialise_model(config, train_dialogs, candidates, seed);
  const auto train_set = encode_dialogs(model, train_dialogs);
  const auto val_set = encode_dialogs(model, val_dialogs);
  return train_model(config, std::move(model), train_set, val_set, seed, hooks);
}

std::vector<TrainResult> train_runs(const TrainConfig& config, std::span<const Dialog> train_dialogs,
                                    std::span<const Dialog> val_dialogs,
                                    const CandidateSet& candidates, const TrainHooks& hooks) {
  std::vector<TrainResult> runs;
  for (std::size_t r = 0; r < config.runs; ++r) {
    spdlog::info("run {}/{} (seed {})", r + 1, config.runs, config.seed + r);
    runs.push_back(train(config, train_dialogs, val_dialogs, candidates, config.seed + r, hooks));
  }
  return runs;
}

std::size_t best_run(std::span<const TrainResult> runs) {
  if (runs.empty()) throw std::invalid_argument("best_run: no runs");
  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i)
    if (runs[i].best_val_accuracy > runs[best].best_val_accuracy) best = i;
  return best;
}

}  // namespace memdialog
