#include <doctest.h>

#include <algorithm>
#include <set>

#include "helpers.hpp"
#include "memdialog/corpus.hpp"

using namespace memdialog;

namespace {

const char* kFig3 =
    "1 hello\thello what can i help you with today\n"
    "2 can you book a table\ti'm on it\n"
    "3 <SILENCE>\tany preference on a type of cuisine\n"
    "4 with italian food\twhere should it be\n"
    "5 in rome\thow many people would be in your party\n"
    "6 we will be four people\twhich price range are looking for\n"
    "7 in a cheap price range please\tok let me look into some options for you\n"
    "8 <SILENCE>\tapi_call italian rome four cheap\n";

}  // namespace

TEST_CASE("tokenize lowercases and splits on whitespace") {
  CHECK(tokenize("  Hello   World\t<SILENCE> ") == Tokens{"hello", "world", "<silence>"});
  CHECK(tokenize("").empty());
  CHECK(join_tokens(Tokens{"a", "b"}) == "a b");
}

TEST_CASE("parse a single pair") {
  const auto dialogs = parse_dialog_file("1 hello\thello what can i help you with today\n\n");
  REQUIRE(dialogs.size() == 1);
  REQUIRE(dialogs[0].events.size() == 1);
  const auto& ex = std::get<Exchange>(dialogs[0].events[0]);
  CHECK(ex.user == Tokens{"hello"});
  CHECK(join_tokens(ex.system) == "hello what can i help you with today");
}

TEST_CASE("parse empty input") { CHECK(parse_dialog_file("").empty()); }

TEST_CASE("parse kb facts and several dialogs") {
  const auto dialogs = parse_dialog_file(
      "1 hi\thello\n2 resto_1 r_cuisine italian\n3 <SILENCE>\tok\n\n1 bye\tbye\n\n\n");
  REQUIRE(dialogs.size() == 2);
  REQUIRE(dialogs[0].events.size() == 3);
  CHECK(std::holds_alternative<KbFact>(dialogs[0].events[1]));
  CHECK(std::get<KbFact>(dialogs[0].events[1]).tokens == Tokens{"resto_1", "r_cuisine", "italian"});
  CHECK(dialogs[0].exchange_count() == 2);
  CHECK(dialogs[1].exchange_count() == 1);
}

TEST_CASE("missing line number reports the line index") {
  try {
    parse_dialog_file("1 hi\thello\nhello there\tgreetings\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line_index() == 1);
    CHECK(std::string(e.what()).find("line number") != std::string::npos);
  }
}

TEST_CASE("dialog count equals an independent block count") {
  std::string text;
  for (int d = 0; d < 7; ++d) text += std::string(kFig3) + "\n";
  // oracle: count maximal runs of non-blank lines
  std::size_t blocks = 0;
  bool in_block = false;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find('\n', start), text.size());
    const bool blank = end == start;
    if (!blank && !in_block) ++blocks;
    in_block = !blank;
    start = end + 1;
  }
  CHECK(parse_dialog_file(text).size() == blocks);
}

TEST_CASE("subdialogs grow by their predecessor") {
  const auto dialogs = parse_dialog_file(kFig3);
  REQUIRE(dialogs.size() == 1);
  const auto subs = split_subdialogs(dialogs[0]);
  REQUIRE(subs.size() == 8);
  CHECK(subs[0].history.empty());
  CHECK(subs[1].history.size() == 2);
  CHECK(subs[1].history[0].tokens == Tokens{"hello"});
  CHECK(subs[1].history[0].speaker == Speaker::user);
  CHECK(subs[1].history[1].speaker == Speaker::system);
  CHECK(subs[7].history.size() == 14);
  CHECK(join_tokens(subs[7].gold) == "api_call italian rome four cheap");
  for (std::size_t i = 1; i < subs.size(); ++i)
    CHECK(subs[i].history.size() == subs[i - 1].history.size() + 2);
}

TEST_CASE("last subdialog reproduces every event") {
  const auto dialogs = parse_dialog_file(
      "1 hi\thello\n2 resto_1 r_phone p1\n3 resto_1 r_cuisine thai\n4 <SILENCE>\tok\n5 thanks\tbye\n");
  const auto subs = split_subdialogs(dialogs[0]);
  REQUIRE(subs.size() == 3);
  std::vector<Tokens> flat;
  for (const auto& u : subs.back().history) flat.push_back(u.tokens);
  flat.push_back(subs.back().query);
  flat.push_back(subs.back().gold);
  std::vector<Tokens> events;
  for (const auto& ev : dialogs[0].events) {
    if (const auto* ex = std::get_if<Exchange>(&ev)) {
      events.push_back(ex->user);
      events.push_back(ex->system);
    } else {
      events.push_back(std::get<KbFact>(ev).tokens);
    }
  }
  CHECK(flat == events);
  CHECK(subs[1].history[2].speaker == Speaker::kb_fact);
}

TEST_CASE("vocabulary sizes") {
  const auto empty = Vocabulary::build({}, nullptr, 1);
  CHECK(empty.size() == 4);
  CHECK(empty.word(empty.time_keyword(0)) == time_keyword(0));
  CHECK(empty.is_reserved(empty.unknown()));

  const auto dialogs = parse_dialog_file("1 hello\thi\n");
  const auto v = Vocabulary::build(dialogs, nullptr, 1);
  CHECK(v.size() == 6);
  CHECK(v.id("hello") == 0);
  CHECK(v.id("hi") == 1);
  CHECK(v.start_context() != v.end_of_response());
}

TEST_CASE("vocabulary is deterministic and invertible") {
  const auto dialogs = parse_dialog_file(kFig3);
  const auto cands = testing::tiny_candidates();
  const auto a = Vocabulary::build(dialogs, &cands, 14);
  const auto b = Vocabulary::build(dialogs, &cands, 14);
  CHECK(a == b);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.id(a.word(static_cast<int>(i))) == static_cast<int>(i));
  for (const auto& sd : split_subdialogs(dialogs[0])) {
    CHECK(a.decode(a.encode(sd.query)) == sd.query);
    CHECK(a.decode(a.encode(sd.gold)) == sd.gold);
  }
  CHECK(a.find("sorry").has_value());
}

TEST_CASE("vocabulary maps unknown words to UNK and reports them") {
  const auto v = Vocabulary::build(parse_dialog_file("1 hello\thi\n"), nullptr, 1);
  std::vector<std::string> unknown;
  const auto ids = v.encode(tokenize("hello klingon"), &unknown);
  CHECK(ids[1] == v.unknown());
  CHECK(unknown == std::vector<std::string>{"klingon"});
}

TEST_CASE("corpus words may not collide with reserved tokens") {
  const auto dialogs = parse_dialog_file("1 <@eor>\thi\n");
  CHECK_THROWS(Vocabulary::build(dialogs, nullptr, 1));
}

TEST_CASE("temporal keywords") {
  std::vector<Utterance> history = {
      {Speaker::user, {"a"}}, {Speaker::system, {"b"}}, {Speaker::user, {"c"}}};
  CHECK(attach_time_keywords({}, 3).empty());

  const auto t5 = attach_time_keywords(history, 5);
  CHECK(t5[0].tokens == Tokens{"a", time_keyword(0)});
  CHECK(t5[1].tokens == Tokens{"b", time_keyword(1)});
  CHECK(t5[2].tokens == Tokens{"c", time_keyword(2)});

  const auto t2 = attach_time_keywords(history, 2);
  CHECK(t2[0].tokens.back() == time_keyword(0));
  CHECK(t2[1].tokens.back() == time_keyword(1));
  CHECK(t2[2].tokens.back() == time_keyword(1));
  for (std::size_t i = 0; i < history.size(); ++i) {
    CHECK(t2[i].tokens.size() == history[i].tokens.size() + 1);
    CHECK(t2[i].speaker == history[i].speaker);
  }
  CHECK_THROWS(attach_time_keywords(history, 0));
}

TEST_CASE("candidate files") {
  const auto c = parse_candidates("1 hello what can i help you with today\n1 i'm on it\n1 api_call a b c d\n");
  CHECK(c.size() == 3);
  CHECK(c.find(tokenize("i'm on it")) == std::optional<std::size_t>(1));
  CHECK(c.find(tokenize("api_call a b c d")) == std::optional<std::size_t>(2));
  CHECK_FALSE(c.find(tokenize("nope")).has_value());
  try {
    parse_candidates("1 a\n1 b\n1 a\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line_index() == 2);
  }
}

TEST_CASE("gold responses resolve against candidates") {
  const auto dialogs = parse_dialog_file(kFig3);
  auto subs = split_subdialogs(dialogs[0]);
  CandidateSet set;
  set.add(tokenize("i'm on it"));
  resolve_gold_candidates(subs, set);
  CHECK(set.size() == 8);
  for (const auto& s : subs) {
    REQUIRE(s.gold_candidate.has_value());
    CHECK(set.response(*s.gold_candidate) == s.gold);
  }
  CHECK(*subs[1].gold_candidate == 0);
}

TEST_CASE("split names") {
  CHECK(to_string(Split::train) == "trn");
  CHECK(parse_split("dev") == Split::dev);
  CHECK_THROWS(parse_split("valid"));
}
