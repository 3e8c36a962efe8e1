#include "memdialog/simulator.hpp"

#include <array>
#include <fstream>
#include <stdexcept>

#include "memdialog/numerics.hpp"

namespace memdialog {

namespace {

const std::array<std::vector<std::string>, 4> kSlotValues = {{
    {"british", "french", "indian", "italian", "spanish"},
    {"bombay", "london", "madrid", "paris", "rome"},
    {"two", "four", "six", "eight"},
    {"cheap", "moderate", "expensive"},
}};

const std::array<std::string, 4> kQuestions = {
    "any preference on a type of cuisine", "where should it be",
    "how many people would be in your party", "which price range are looking for"};

const std::vector<std::string> kGreetings = {"hello", "hi", "good morning", "hey there"};
const std::vector<std::string> kRequests = {
    "can you book a table", "i'd like to book a table", "may i have a table",
    "can you make a restaurant reservation", "i would like to book a table"};

// Slot phrases inside a request; '#' is replaced by the value.
const std::array<std::vector<std::string>, 4> kRequestPhrases = {{
    {"with # food", "with # cuisine"},
    {"in #"},
    {"for # people", "for # guests"},
    {"in a # price range"},
}};

// Answers to the slot questions.
const std::array<std::vector<std::string>, 4> kAnswers = {{
    {"with # food", "i love # food", "i want # cuisine", "may i have # food"},
    {"in #", "somewhere in #", "i'd like it in #", "#"},
    {"we will be # people", "for # people", "there will be #", "we will be #"},
    {"in a # price range please", "i am looking for a # restaurant", "in a # price range",
     "i want a # restaurant"},
}};

const std::string kOnIt = "i'm on it";
const std::string kLooking = "ok let me look into some options for you";
const std::string kGreetingReply = "hello what can i help you with today";
const std::string kSilenceUtterance = "<SILENCE>";

std::string fill(const std::string& pattern, const std::string& value) {
  std::string out;
  for (char c : pattern) {
    if (c == '#') out += value;
    else out += c;
  }
  return out;
}

template <typename C>
const auto& pick(const C& options, Rng& rng) {
  return options[rng.below(options.size())];
}

std::string api_call(const std::array<std::string, 4>& slots) {
  return "api_call " + slots[0] + " " + slots[1] + " " + slots[2] + " " + slots[3];
}

}  // namespace

std::vector<Dialog> simulate_task1(std::size_t count, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "simulate_task1"));
  std::vector<Dialog> dialogs;
  dialogs.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    std::array<std::string, 4> slots;
    for (std::size_t s = 0; s < 4; ++s) slots[s] = pick(kSlotValues[s], rng);
    std::array<bool, 4> given{};
    for (auto& g : given) g = rng.below(2) == 1;

    Dialog d;
    auto say = [&](const std::string& user, const std::string& system) {
      d.events.emplace_back(Exchange{tokenize(user), tokenize(system)});
    };
    say(pick(kGreetings, rng), kGreetingReply);

    std::vector<std::size_t> order;
    for (std::size_t s = 0; s < 4; ++s)
      if (given[s]) order.push_back(s);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::string request = pick(kRequests, rng);
    for (std::size_t s : order) request += " " + fill(pick(kRequestPhrases[s], rng), slots[s]);
    say(request, kOnIt);

    std::string user = kSilenceUtterance;
    for (std::size_t s = 0; s < 4; ++s) {
      if (given[s]) continue;
      say(user, kQuestions[s]);
      user = fill(pick(kAnswers[s], rng), slots[s]);
    }
    say(user, kLooking);
    say(kSilenceUtterance, api_call(slots));
    dialogs.push_back(std::move(d));
  }
  return dialogs;
}

CandidateSet task1_candidates() {
  CandidateSet set;
  set.add(tokenize(kGreetingReply));
  set.add(tokenize(kOnIt));
  for (const auto& q : kQuestions) set.add(tokenize(q));
  set.add(tokenize(kLooking));
  for (const auto& c : kSlotValues[0])
    for (const auto& l : kSlotValues[1])
      for (const auto& n : kSlotValues[2])
        for (const auto& p : kSlotValues[3]) set.add(tokenize(api_call({c, l, n, p})));
  return set;
}

std::string format_dialogs(std::span<const Dialog> dialogs) {
  std::string out;
  for (std::size_t i = 0; i < dialogs.size(); ++i) {
    if (i > 0) out += '\n';
    std::size_t line = 1;
    for (const auto& ev : dialogs[i].events) {
      out += std::to_string(line++) + ' ';
      if (const auto* ex = std::get_if<Exchange>(&ev))
        out += join_tokens(ex->user) + '\t' + join_tokens(ex->system);
      else
        out += join_tokens(std::get<KbFact>(ev).tokens);
      out += '\n';
    }
  }
  return out;
}

std::string format_candidates(const CandidateSet& candidates) {
  std::string out;
  for (const auto& r : candidates.responses()) out += "1 " + join_tokens(r) + '\n';
  return out;
}

void write_synthetic_task1(const std::filesystem::path& dir, std::size_t dialogs_per_split,
                           std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  auto write = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
  };
  for (Split split : {Split::train, Split::dev, Split::test}) {
    const auto dialogs =
        simulate_task1(dialogs_per_split, derive_seed(seed, std::string(to_string(split))));
    write(dir / ("dialog-babi-task1-synthetic-" + std::string(to_string(split)) + ".txt"),
          format_dialogs(dialogs));
  }
  write(dir / "dialog-babi-candidates.txt", format_candidates(task1_candidates()));
}

}  // namespace memdialog
