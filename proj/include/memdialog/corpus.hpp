#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace memdialog {

using Tokens = std::vector<std::string>;

/// Lowercase + whitespace split. bAbI files are already tokenized.
Tokens tokenize(std::string_view text);
std::string join_tokens(std::span<const std::string> tokens);

enum class Speaker { user, system, kb_fact };
std::string_view to_string(Speaker s);

struct Utterance {
  Speaker speaker = Speaker::user;
  Tokens tokens;
  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Exchange {
  Tokens user;
  Tokens system;
  friend bool operator==(const Exchange&, const Exchange&) = default;
};

/// An unpaired knowledge-base line (API call results in tasks 3-6).
struct KbFact {
  Tokens tokens;
  friend bool operator==(const KbFact&, const KbFact&) = default;
};

using DialogEvent = std::variant<Exchange, KbFact>;

struct Dialog {
  std::vector<DialogEvent> events;
  std::size_t exchange_count() const;
  friend bool operator==(const Dialog&, const Dialog&) = default;
};

struct Subdialog {
  std::vector<Utterance> history;
  Tokens query;
  Tokens gold;
  std::optional<std::size_t> gold_candidate;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line_index, const std::string& detail, const std::string& source = {});
  /// Zero-based line index in the parsed text.
  std::size_t line_index() const { return line_; }
  const std::string& detail() const { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

/// Dialog bAbI format: "<n> <user>\t<system>" lines, tab-less lines are KB
/// facts, dialogs separated by blank lines.
std::vector<Dialog> parse_dialog_file(std::string_view text);
std::vector<Dialog> load_dialog_file(const std::filesystem::path& path);

/// One subdialog per exchange; KB facts enter the history of later exchanges.
std::vector<Subdialog> split_subdialogs(const Dialog& dialog);

// ---------------------------------------------------------------------------
// Reserved tokens

std::string time_keyword(std::size_t k);
inline constexpr std::string_view kStartContext = "<@start>";
inline constexpr std::string_view kEndOfResponse = "<@eor>";
inline constexpr std::string_view kUnknown = "<@unk>";
inline constexpr std::string_view kSilence = "<silence>";

/// Appends TIME_min(n, t-1) to the utterance with n earlier utterances.
std::vector<Utterance> attach_time_keywords(std::vector<Utterance> history, std::size_t t);

// ---------------------------------------------------------------------------

class CandidateSet {
 public:
  CandidateSet() = default;

  std::size_t size() const { return responses_.size(); }
  bool empty() const { return responses_.empty(); }
  const Tokens& response(std::size_t id) const { return responses_.at(id); }
  const std::vector<Tokens>& responses() const { return responses_; }

  std::optional<std::size_t> find(std::span<const std::string> tokens) const;
  /// Adds a response; throws std::invalid_argument on duplicates.
  std::size_t add(Tokens tokens);
  /// Returns the existing id or appends.
  std::size_t find_or_add(const Tokens& tokens);

 private:
  std::vector<Tokens> responses_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// One candidate per line; a leading line number (official files use "1 ")
/// is stripped. Duplicate lines raise ParseError naming the line.
CandidateSet parse_candidates(std::string_view text);
CandidateSet load_candidates(const std::filesystem::path& path);

/// Sets gold_candidate on every subdialog, appending gold responses that are
/// missing from the set (logged once with the count).
void resolve_gold_candidates(std::span<Subdialog> subdialogs, CandidateSet& candidates);

// ---------------------------------------------------------------------------

class Vocabulary {
 public:
  /// Corpus tokens in first-occurrence order (dialogs, then candidates),
  /// followed by TIME_0..TIME_{t-1}, START_CTX, END_RESP, UNK.
  static Vocabulary build(std::span<const Dialog> dialogs, const CandidateSet* candidates,
                          std::size_t time_keywords);

  std::size_t size() const { return words_.size(); }
  std::optional<int> find(std::string_view word) const;
  int id(std::string_view word) const;  // throws std::out_of_range
  const std::string& word(int id) const { return words_.at(static_cast<std::size_t>(id)); }

  int time_keyword(std::size_t k) const { return time_ids_.at(k); }
  std::size_t time_keyword_count() const { return time_ids_.size(); }
  int start_context() const { return start_id_; }
  int end_of_response() const { return end_id_; }
  int unknown() const { return unk_id_; }
  bool is_reserved(int id) const;

  /// Unknown words map to UNK and are reported through `unknown_words`.
  std::vector<int> encode(std::span<const std::string> tokens,
                          std::vector<std::string>* unknown_words = nullptr) const;
  Tokens decode(std::span<const int> ids) const;

  /// Appends a corpus token after the reserved block (no-op if present).
  int add(const std::string& word);

  const std::vector<std::string>& words() const { return words_; }
  /// Rebuilds from a stored word list; reserved tokens are located by name.
  static Vocabulary from_words(std::vector<std::string> words);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  int insert(const std::string& word);
  void bind_reserved();

  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
  std::vector<int> time_ids_;
  int start_id_ = -1;
  int end_id_ = -1;
  int unk_id_ = -1;
};

// ---------------------------------------------------------------------------
// Dataset files

enum class Split { train, dev, test };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);  // "trn" | "dev" | "tst"

/// dialog-babi-task<N>-*-<split>.txt inside `dir` (OOV test files excluded).
std::optional<std::filesystem::path> find_task_file(const std::filesystem::path& dir, int task,
                                                    Split split);
/// dialog-babi-candidates.txt (tasks 1-5) or dialog-babi-task6-dstc2-candidates.txt.
std::optional<std::filesystem::path> find_candidates_file(const std::filesystem::path& dir,
                                                          int task);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace memdialog
