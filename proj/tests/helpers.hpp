#pragma once

#include <string>
#include <vector>

#include "memdialog/corpus.hpp"
#include "memdialog/model.hpp"

namespace memdialog::testing {

inline Dialog make_dialog(const std::vector<std::pair<std::string, std::string>>& pairs) {
  Dialog d;
  for (const auto& [u, s] : pairs) d.events.emplace_back(Exchange{tokenize(u), tokenize(s)});
  return d;
}

/// Three-turn dialogs over 13 corpus words; with t = 4 the vocabulary has
/// exactly 20 entries.
inline std::vector<Dialog> tiny_dialogs() {
  return {make_dialog({{"hello there", "hi friend"},
                       {"book table", "what cuisine"},
                       {"italian food", "api_call italian"}}),
          make_dialog({{"hello", "hi friend"},
                       {"book table", "what cuisine"},
                       {"food", "api_call italian"}})};
}

inline CandidateSet tiny_candidates() {
  CandidateSet c;
  c.add(tokenize("hi friend"));
  c.add(tokenize("what cuisine"));
  c.add(tokenize("api_call italian"));
  c.add(tokenize("sorry bye"));
  return c;
}

inline std::vector<Subdialog> all_subdialogs(const std::vector<Dialog>& dialogs) {
  std::vector<Subdialog> out;
  for (const auto& d : dialogs)
    for (auto& s : split_subdialogs(d)) out.push_back(std::move(s));
  return out;
}

template <typename T>
DialogModel<T> tiny_model(ModelConfig config, std::uint64_t seed = 3) {
  const auto dialogs = tiny_dialogs();
  auto candidates = tiny_candidates();
  const auto subs = all_subdialogs(dialogs);
  const auto pre = derive_preprocessing(subs, config.time_on_query);
  auto vocab = Vocabulary::build(dialogs, &candidates, pre.time_keywords);
  if (config.nlg == NlgKind::word_by_word) candidates = CandidateSet{};
  return DialogModel<T>(config, std::move(vocab), std::move(candidates), pre, seed);
}

inline ModelConfig tiny_config(NlgKind nlg, EncodingMode enc, std::size_t hops) {
  ModelConfig c = ModelConfig::defaults_for(nlg);
  c.encoding = enc;
  c.dim = 8;
  c.hops = hops;
  c.hidden = 6;
  c.context_words = 2;
  c.init_mean = 0.0;
  c.init_std = 0.3;
  c.decoder_init_range = 0.5;
  return c;
}

}  // namespace memdialog::testing
