#include <doctest.h>

#include <filesystem>
#include <set>

#include "memdialog/corpus.hpp"
#include "memdialog/simulator.hpp"

using namespace memdialog;

TEST_CASE("simulated dialogs are deterministic and end in an api call") {
  const auto a = simulate_task1(50, 3);
  const auto b = simulate_task1(50, 3);
  CHECK(format_dialogs(a) == format_dialogs(b));
  CHECK(format_dialogs(a) != format_dialogs(simulate_task1(50, 4)));
  for (const auto& d : a) {
    const auto& last = std::get<Exchange>(d.events.back());
    CHECK(last.user == Tokens{"<silence>"});
    CHECK(last.system.front() == "api_call");
    CHECK(last.system.size() == 5);
  }
}

TEST_CASE("every simulated response is a candidate") {
  const auto cands = task1_candidates();
  CHECK(cands.size() == 307);
  for (const auto& d : simulate_task1(200, 9))
    for (const auto& sd : split_subdialogs(d)) CHECK(cands.find(sd.gold).has_value());
}

TEST_CASE("text format round trips through the parser") {
  const auto dialogs = simulate_task1(10, 1);
  const auto parsed = parse_dialog_file(format_dialogs(dialogs));
  CHECK(format_dialogs(parsed) == format_dialogs(dialogs));
  const auto cands = parse_candidates(format_candidates(task1_candidates()));
  CHECK(cands.size() == 307);
}

TEST_CASE("simulator avoids the perturbed phrasings") {
  std::set<std::string> users;
  for (const auto& d : simulate_task1(500, 5))
    for (const auto& ev : d.events) users.insert(join_tokens(std::get<Exchange>(ev).user));
  CHECK(users.count("book a table please") == 0);
  CHECK(users.count("rome please") == 0);
  CHECK(users.count("four please") == 0);
  CHECK(users.count("please cheap price range") == 0);
  CHECK(users.count("in rome") == 1);
}

TEST_CASE("synthetic files are found by the task file lookup") {
  const auto dir = std::filesystem::temp_directory_path() / "memdialog_sim_test";
  std::filesystem::remove_all(dir);
  write_synthetic_task1(dir, 12, 1);
  for (Split s : {Split::train, Split::dev, Split::test}) {
    const auto path = find_task_file(dir, 1, s);
    REQUIRE(path.has_value());
    CHECK(load_dialog_file(*path).size() == 12);
  }
  CHECK(find_candidates_file(dir, 1).has_value());
  CHECK(load_dialog_file(*find_task_file(dir, 1, Split::train)).size() == 12);
  std::filesystem::remove_all(dir);
}
