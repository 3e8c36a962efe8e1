#include "memdialog/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

namespace memdialog {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

// Strips "<digits> " and returns the rest, or nullopt if there is no number.
std::optional<std::string_view> strip_line_number(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i == 0 || i == line.size() || (line[i] != ' ' && line[i] != '\t')) return std::nullopt;
  return line.substr(i + 1);
}

}  // namespace

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) out.push_back(std::move(current)), current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::string_view to_string(Speaker s) {
  switch (s) {
    case Speaker::user: return "user";
    case Speaker::system: return "system";
    case Speaker::kb_fact: return "kb_fact";
  }
  return "unknown";
}

std::size_t Dialog::exchange_count() const {
  return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [](const auto& e) {
    return std::holds_alternative<Exchange>(e);
  }));
}

ParseError::ParseError(std::size_t line_index, const std::string& detail,
                       const std::string& source)
    : std::runtime_error((source.empty() ? "" : source + ":") + "line " +
                         std::to_string(line_index + 1) + ": " + detail),
      line_(line_index),
      detail_(detail) {}

std::vector<Dialog> parse_dialog_file(std::string_view text) {
  std::vector<Dialog> dialogs;
  Dialog current;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) {
      if (!current.events.empty()) dialogs.push_back(std::move(current));
      current = Dialog{};
      continue;
    }
    const auto body = strip_line_number(line);
    if (!body) throw ParseError(i, "missing line number");
    const auto tab = body->find('\t');
    if (tab == std::string_view::npos) {
      auto tokens = tokenize(*body);
      if (tokens.empty()) throw ParseError(i, "empty knowledge-base line");
      current.events.emplace_back(KbFact{std::move(tokens)});
    } else {
      Exchange ex{tokenize(body->substr(0, tab)), tokenize(body->substr(tab + 1))};
      if (ex.user.empty() || ex.system.empty())
        throw ParseError(i, "exchange with an empty side");
      current.events.emplace_back(std::move(ex));
    }
  }
  if (!current.events.empty()) dialogs.push_back(std::move(current));
  return dialogs;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Dialog> load_dialog_file(const std::filesystem::path& path) {
  try {
    return parse_dialog_file(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(e.line_index(), e.detail(), path.string());
  }
}

std::vector<Subdialog> split_subdialogs(const Dialog& dialog) {
  std::vector<Subdialog> out;
  std::vector<Utterance> history;
  for (const auto& event : dialog.events) {
    if (const auto* fact = std::get_if<KbFact>(&event)) {
      history.push_back({Speaker::kb_fact, fact->tokens});
      continue;
    }
    const auto& ex = std::get<Exchange>(event);
    out.push_back(Subdialog{history, ex.user, ex.system, std::nullopt});
    history.push_back({Speaker::user, ex.user});
    history.push_back({Speaker::system, ex.system});
  }
  return out;
}

std::string time_keyword(std::size_t k) { return "<@time" + std::to_string(k) + ">"; }

std::vector<Utterance> attach_time_keywords(std::vector<Utterance> history, std::size_t t) {
  if (t == 0) throw std::invalid_argument("attach_time_keywords: t must be >= 1");
  for (std::size_t n = 0; n < history.size(); ++n)
    history[n].tokens.push_back(time_keyword(std::min(n, t - 1)));
  return history;
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> CandidateSet::find(std::span<const std::string> tokens) const {
  const auto it = index_.find(join_tokens(tokens));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t CandidateSet::add(Tokens tokens) {
  auto key = join_tokens(tokens);
  if (index_.contains(key)) throw std::invalid_argument("duplicate candidate: " + key);
  const std::size_t id = responses_.size();
  index_.emplace(std::move(key), id);
  responses_.push_back(std::move(tokens));
  return id;
}

std::size_t CandidateSet::find_or_add(const Tokens& tokens) {
  if (auto id = find(tokens)) return *id;
  return add(tokens);
}

CandidateSet parse_candidates(std::string_view text) {
  CandidateSet set;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    const auto body = strip_line_number(line).value_or(line);
    auto tokens = tokenize(body);
    if (tokens.empty()) continue;
    if (set.find(tokens))
      throw ParseError(i, "duplicate candidate '" + join_tokens(tokens) + "'");
    set.add(std::move(tokens));
  }
  return set;
}

CandidateSet load_candidates(const std::filesystem::path& path) {
  try {
    return parse_candidates(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(e.line_index(), e.detail(), path.string());
  }
}

void resolve_gold_candidates(std::span<Subdialog> subdialogs, CandidateSet& candidates) {
  std::size_t appended = 0;
  for (auto& sd : subdialogs) {
    const auto before = candidates.size();
    sd.gold_candidate = candidates.find_or_add(sd.gold);
    if (candidates.size() != before) ++appended;
  }
  if (appended)
    spdlog::warn("{} gold responses were missing from the candidate set and were appended",
                 appended);
}

// ---------------------------------------------------------------------------

Vocabulary Vocabulary::build(std::span<const Dialog> dialogs, const CandidateSet* candidates,
                             std::size_t time_keywords) {
  if (time_keywords == 0) throw std::invalid_argument("Vocabulary::build: t must be >= 1");
  Vocabulary v;
  const auto add_all = [&v](const Tokens& tokens) {
    for (const auto& w : tokens) v.insert(w);
  };
  for (const auto& dialog : dialogs)
    for (const auto& event : dialog.events)
      std::visit(
          [&](const auto& e) {
            if constexpr (std::is_same_v<std::decay_t<decltype(e)>, Exchange>) {
              add_all(e.user);
              add_all(e.system);
            } else {
              add_all(e.tokens);
            }
          },
          event);
  if (candidates)
    for (const auto& r : candidates->responses()) add_all(r);

  std::vector<std::string> reserved;
  for (std::size_t k = 0; k < time_keywords; ++k) reserved.push_back(memdialog::time_keyword(k));
  reserved.emplace_back(kStartContext);
  reserved.emplace_back(kEndOfResponse);
  reserved.emplace_back(kUnknown);
  for (const auto& r : reserved) {
    if (v.index_.contains(r))
      throw std::invalid_argument("corpus token collides with reserved token " + r);
    v.insert(r);
  }
  v.bind_reserved();
  return v;
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  Vocabulary v;
  for (const auto& w : words)
    if (v.index_.contains(w)) throw std::invalid_argument("duplicate vocabulary entry " + w);
    else v.insert(w);
  v.bind_reserved();
  return v;
}

int Vocabulary::insert(const std::string& word) {
  const auto [it, inserted] = index_.try_emplace(word, static_cast<int>(words_.size()));
  if (inserted) words_.push_back(word);
  return it->second;
}

void Vocabulary::bind_reserved() {
  time_ids_.clear();
  for (std::size_t k = 0;; ++k) {
    const auto it = index_.find(memdialog::time_keyword(k));
    if (it == index_.end()) break;
    time_ids_.push_back(it->second);
  }
  const auto require = [this](std::string_view name) {
    const auto it = index_.find(std::string(name));
    if (it == index_.end())
      throw std::invalid_argument("vocabulary lacks reserved token " + std::string(name));
    return it->second;
  };
  if (time_ids_.empty()) throw std::invalid_argument("vocabulary lacks temporal keywords");
  start_id_ = require(kStartContext);
  end_id_ = require(kEndOfResponse);
  unk_id_ = require(kUnknown);
}

std::optional<int> Vocabulary::find(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::id(std::string_view word) const {
  if (auto i = find(word)) return *i;
  throw std::out_of_range("word not in vocabulary: " + std::string(word));
}

bool Vocabulary::is_reserved(int id) const {
  return id == start_id_ || id == end_id_ || id == unk_id_ ||
         std::find(time_ids_.begin(), time_ids_.end(), id) != time_ids_.end();
}

std::vector<int> Vocabulary::encode(std::span<const std::string> tokens,
                                    std::vector<std::string>* unknown_words) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& w : tokens) {
    if (auto i = find(w)) {
      ids.push_back(*i);
    } else {
      ids.push_back(unk_id_);
      if (unknown_words) unknown_words->push_back(w);
    }
  }
  return ids;
}

Tokens Vocabulary::decode(std::span<const int> ids) const {
  Tokens out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(word(i));
  return out;
}

int Vocabulary::add(const std::string& word) {
  if (auto i = find(word)) return *i;
  return insert(word);
}

// ---------------------------------------------------------------------------

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "trn";
    case Split::dev: return "dev";
    case Split::test: return "tst";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "trn") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "tst") return Split::test;
  throw std::invalid_argument("unknown split '" + std::string(s) + "' (expected trn, dev or tst)");
}

std::optional<std::filesystem::path> find_task_file(const std::filesystem::path& dir, int task,
                                                    Split split) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) return std::nullopt;
  const std::string prefix = "dialog-babi-task" + std::to_string(task) + "-";
  const std::string suffix = "-" + std::string(to_string(split)) + ".txt";
  std::vector<fs::path> matches;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.starts_with(prefix) && name.ends_with(suffix)) matches.push_back(entry.path());
  }
  if (matches.empty()) return std::nullopt;
  std::sort(matches.begin(), matches.end());
  return matches.front();
}

std::optional<std::filesystem::path> find_candidates_file(const std::filesystem::path& dir,
                                                          int task) {
  const auto path = dir / (task == 6 ? "dialog-babi-task6-dstc2-candidates.txt"
                                     : "dialog-babi-candidates.txt");
  if (std::filesystem::is_regular_file(path)) return path;
  return std::nullopt;
}

}  // namespace memdialog
