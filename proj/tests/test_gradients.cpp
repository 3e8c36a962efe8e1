#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "memdialog/model.hpp"

using namespace memdialog;

namespace {

struct Case {
  NlgKind nlg;
  EncodingMode enc;
  std::size_t hops;
  bool untied = false;
};

/// Worst per-tensor relative error ||g_a - g_n|| / max(||g_a|| + ||g_n||, tiny).
double gradient_error(const Case& c) {
  auto config = testing::tiny_config(c.nlg, c.enc, c.hops);
  config.untied_embeddings = c.untied;
  auto model = testing::tiny_model<double>(config);
  REQUIRE(model.vocabulary().size() == 20);

  std::vector<EncodedExample> batch;
  for (const auto& sd : testing::all_subdialogs(testing::tiny_dialogs())) {
    auto ex = model.encode(sd);
    if (c.nlg == NlgKind::candidates) ex.gold_candidate = *model.candidates().find(sd.gold);
    batch.push_back(ex);
  }

  auto grads = model.params().zeros_like();
  model.loss_and_gradient(batch, grads);
  const auto analytic = grads.tensors();

  double worst = 0;
  auto tensors = model.params().tensors();
  REQUIRE(tensors.size() == analytic.size());
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    auto loss_fn = [&] {
      model.refresh();
      return model.loss(batch);
    };
    const auto numeric = finite_diff_grad(loss_fn, tensors[t].tensor->values());
    model.refresh();
    double diff = 0, na = 0, nn = 0;
    const auto a = analytic[t].tensor->values();
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      diff += (a[i] - numeric[i]) * (a[i] - numeric[i]);
      na += a[i] * a[i];
      nn += numeric[i] * numeric[i];
    }
    const double rel = std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nn), 1e-12);
    INFO(tensors[t].name);
    CHECK(rel < 1e-3);
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace

TEST_CASE("gradients match finite differences") {
  for (auto nlg : {NlgKind::candidates, NlgKind::word_by_word})
    for (auto enc : {EncodingMode::bow, EncodingMode::position})
      for (std::size_t hops : {1u, 3u}) {
        CAPTURE(to_string(nlg));
        CAPTURE(to_string(enc));
        CAPTURE(hops);
        CHECK(gradient_error({nlg, enc, hops}) < 1e-3);
      }
}

TEST_CASE("gradients match with untied embeddings") {
  CHECK(gradient_error({NlgKind::candidates, EncodingMode::position, 3, true}) < 1e-3);
  CHECK(gradient_error({NlgKind::word_by_word, EncodingMode::bow, 2, true}) < 1e-3);
}
