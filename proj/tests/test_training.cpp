#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "memdialog/simulator.hpp"
#include "memdialog/training.hpp"

using namespace memdialog;

namespace {

TrainConfig toy_config(NlgKind nlg, std::size_t epochs, std::size_t batch) {
  TrainConfig c = TrainConfig::defaults_for(nlg);
  c.model = testing::tiny_config(nlg, EncodingMode::bow, 1);
  c.learning_rate = 0.01;
  c.epochs = epochs;
  c.eval_every = 1;
  c.batch_size = batch;
  return c;
}

}  // namespace

TEST_CASE("training defaults per head") {
  const auto c = TrainConfig::defaults_for(NlgKind::candidates);
  CHECK(c.learning_rate == 0.0058);
  CHECK(c.batch_size == 32);
  CHECK(c.epochs == 100);
  CHECK(c.eval_every == 5);
  CHECK(c.model.dim == 44);
  const auto w = TrainConfig::defaults_for(NlgKind::word_by_word);
  CHECK(w.learning_rate == 0.0022);
  CHECK(w.eval_every == 1);
  CHECK(w.model.dim == 59);
  CHECK(w.model.hops == 3);
}

TEST_CASE("config validation") {
  auto c = TrainConfig::defaults_for(NlgKind::candidates);
  c.validate();
  c.eval_every = 7;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = TrainConfig::defaults_for(NlgKind::candidates);
  c.learning_rate = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = TrainConfig::defaults_for(NlgKind::candidates);
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("training loss decreases on a toy corpus") {
  for (auto nlg : {NlgKind::candidates, NlgKind::word_by_word}) {
    const auto dialogs = testing::tiny_dialogs();
    std::vector<double> losses;
    TrainHooks hooks;
    hooks.on_epoch = [&](std::size_t, double loss) { losses.push_back(loss); };
    const auto result = train(toy_config(nlg, 40, 2), dialogs, dialogs, testing::tiny_candidates(), 5, hooks);
    REQUIRE(losses.size() == 40);
    CHECK(losses.back() < 0.5 * losses.front());
    CHECK(result.best_val_accuracy == doctest::Approx(1.0));
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto dialogs = testing::tiny_dialogs();
  const auto cfg = toy_config(NlgKind::word_by_word, 5, 2);
  const auto a = train(cfg, dialogs, dialogs, {}, 9);
  const auto b = train(cfg, dialogs, dialogs, {}, 9);
  CHECK(a.history == b.history);
  const auto ta = a.model.params().tensors(), tb = b.model.params().tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) CHECK(*ta[i].tensor == *tb[i].tensor);
  const auto c = train(cfg, dialogs, dialogs, {}, 10);
  CHECK_FALSE(*c.model.params().tensors()[0].tensor == *ta[0].tensor);
}

TEST_CASE("batch size one and a full batch both converge") {
  const auto dialogs = simulate_task1(40, 3);
  const auto candidates = task1_candidates();
  for (std::size_t batch : {1u, 32u}) {
    auto cfg = toy_config(NlgKind::candidates, batch == 1 ? 20 : 30, batch);
    cfg.model.dim = 20;
    if (batch == 1) cfg.learning_rate = 0.002;
    const auto r = train(cfg, dialogs, dialogs, candidates, 1);
    CAPTURE(batch);
    CHECK(r.history.back().train_loss < r.history.front().train_loss);
    CHECK(r.best_val_accuracy > 0.8);
  }
}

TEST_CASE("best epoch is the arg max of the validation history") {
  const auto dialogs = testing::tiny_dialogs();
  auto cfg = toy_config(NlgKind::candidates, 12, 2);
  cfg.eval_every = 3;
  std::vector<EvalPoint> seen;
  TrainHooks hooks;
  hooks.on_eval = [&](const EvalPoint& p) { seen.push_back(p); };
  const auto r = train(cfg, dialogs, dialogs, testing::tiny_candidates(), 2, hooks);
  CHECK(seen == r.history);
  REQUIRE(r.history.size() == 4);
  const auto best = std::max_element(r.history.begin(), r.history.end(),
                                     [](const auto& a, const auto& b) { return a.val_accuracy < b.val_accuracy; });
  CHECK(r.best_val_accuracy == best->val_accuracy);
  CHECK(r.best_epoch == best->epoch);
  for (const auto& p : r.history) CHECK(p.epoch % 3 == 0);
  const auto val = encode_dialogs(r.model, dialogs);
  CHECK(encoded_accuracy(r.model, val) == doctest::Approx(r.best_val_accuracy));
}

TEST_CASE("non-finite loss aborts with the batch index") {
  const auto dialogs = testing::tiny_dialogs();
  const auto cfg = toy_config(NlgKind::candidates, 3, 2);
  auto model = initialise_model(cfg, dialogs, testing::tiny_candidates(), 1);
  const auto examples = encode_dialogs(model, dialogs);
  model.params().memnet.hop_outputs[0](0, 0) = std::numeric_limits<float>::quiet_NaN();
  model.refresh();
  try {
    train_model(cfg, model, examples, examples, 1);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("batch 0") != std::string::npos);
  }
}

TEST_CASE("several runs use consecutive seeds") {
  const auto dialogs = testing::tiny_dialogs();
  auto cfg = toy_config(NlgKind::candidates, 3, 2);
  cfg.runs = 3;
  cfg.seed = 20;
  const auto runs = train_runs(cfg, dialogs, dialogs, testing::tiny_candidates());
  REQUIRE(runs.size() == 3);
  const auto single = train(cfg, dialogs, dialogs, testing::tiny_candidates(), 21);
  CHECK(single.history == runs[1].history);
  const auto b = best_run(runs);
  for (const auto& r : runs) CHECK(r.best_val_accuracy <= runs[b].best_val_accuracy);
}

TEST_CASE("initialise_model adds dummy and missing gold candidates") {
  const auto dialogs = testing::tiny_dialogs();
  auto cfg = toy_config(NlgKind::candidates, 1, 1);
  CandidateSet partial;
  partial.add(tokenize("hi friend"));
  const auto m = initialise_model(cfg, dialogs, partial, 1);
  CHECK(m.candidates().size() == 3);
  cfg.dummy_candidates = 10;
  const auto d = initialise_model(cfg, dialogs, partial, 1);
  CHECK(d.candidates().size() == 13);
  for (const auto& ex : encode_dialogs(d, dialogs)) CHECK(ex.gold_candidate != EncodedExample::no_candidate);
}
