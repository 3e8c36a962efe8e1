#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "memdialog/corpus.hpp"
#include "memdialog/model.hpp"
#include "memdialog/training.hpp"

namespace memdialog {

/// Anything that maps a subdialog to a response.
class ResponsePredictor {
 public:
  virtual ~ResponsePredictor() = default;
  virtual Tokens respond(const Subdialog& sd) const = 0;
};

class ModelPredictor : public ResponsePredictor {
 public:
  explicit ModelPredictor(const DialogModel<float>& model) : model_(model) {}
  Tokens respond(const Subdialog& sd) const override { return model_.respond(sd); }

 private:
  const DialogModel<float>& model_;
};

/// Always answers with the gold response.
class OraclePredictor : public ResponsePredictor {
 public:
  Tokens respond(const Subdialog& sd) const override { return sd.gold; }
};

/// Always answers with the same response.
class FixedPredictor : public ResponsePredictor {
 public:
  explicit FixedPredictor(Tokens response) : response_(std::move(response)) {}
  Tokens respond(const Subdialog&) const override { return response_; }

 private:
  Tokens response_;
};

struct EvalReport {
  int task = 0;
  std::string config;
  std::size_t responses = 0;
  std::size_t correct_responses = 0;
  std::size_t dialogs = 0;
  std::size_t correct_dialogs = 0;

  double response_percent() const;
  double dialog_percent() const;
  /// "99.95 (99.70)"
  std::string formatted() const;
  nlohmann::json to_json() const;
};

/// Exact token-sequence match per subdialog; a dialog counts when all its
/// responses match. Work is split over `threads` workers (0 = hardware).
EvalReport evaluate(const ResponsePredictor& predictor, std::span<const Dialog> dialogs,
                    std::size_t threads = 1);
double response_accuracy(const ResponsePredictor& predictor, std::span<const Dialog> dialogs);
double dialog_accuracy(const ResponsePredictor& predictor, std::span<const Dialog> dialogs);

/// "R (D)" with two decimals.
std::string format_accuracy(double response_percent, double dialog_percent);

// --- results table ---------------------------------------------------------

struct TableRow {
  int task = 1;
  bool dummy_candidates = false;
  std::string label() const;  // "task 1" ... "task 6", "task 1 *"
};

struct TableColumn {
  NlgKind nlg = NlgKind::candidates;
  EncodingMode encoding = EncodingMode::bow;
  std::string label() const;  // "candidates bow", ...
};

struct CellResult {
  std::optional<EvalReport> report;
  std::string skip_reason;
};

using CellRunner = std::function<CellResult(const TableRow&, const TableColumn&)>;

struct ResultsTable {
  std::vector<TableRow> rows;
  std::vector<TableColumn> columns;
  std::vector<std::vector<CellResult>> cells;  // [row][column]

  /// Aligned text; skipped cells show "skipped" with reasons listed below.
  std::string render() const;
  /// One record per cell.
  nlohmann::json records() const;
};

/// Tasks 1-6 then task 1 with dummy candidates.
std::vector<TableRow> table_rows();
/// {candidates, wordbyword} x {bow, position}.
std::vector<TableColumn> table_columns();

/// Runs every cell; exceptions from the runner become skipped cells.
ResultsTable results_table(const CellRunner& runner);

struct TableBudget {
  std::size_t epochs = 100;
  std::size_t runs = 1;
  std::size_t max_train_dialogs = 0;  // 0 = all
  std::uint64_t seed = 1;
};
/// "full" or comma-separated key=value over epochs, runs, dialogs, seed.
TableBudget parse_budget(std::string_view spec);

/// Trains each cell from `data_dir` under `budget` and evaluates on the test
/// split. Missing files skip the cell with the file name as reason.
CellRunner training_cell_runner(std::filesystem::path data_dir, TableBudget budget);

/// Largest divisor of `epochs` not above `preferred`.
std::size_t fit_eval_every(std::size_t epochs, std::size_t preferred);

// --- perturbation experiment -------------------------------------------------

struct PerturbationSpec {
  /// (user, system) pairs with {slot} placeholders.
  std::vector<std::pair<std::string, std::string>> dialog_template;
  /// Slot name and values, in file order.
  std::vector<std::pair<std::string, std::vector<std::string>>> slots;
  struct Modification {
    std::size_t turn = 0;  // 1-based exchange index
    std::string user;
  };
  std::vector<Modification> modifications;
};

PerturbationSpec parse_perturbation_spec(std::string_view json_text);
PerturbationSpec load_perturbation_spec(const std::filesystem::path& path);
/// The spec file shipped in the repository's data directory.
std::filesystem::path default_perturbation_spec_path();

/// Replaces {name} with the value of each slot.
std::string fill_slots(std::string_view pattern,
                       std::span<const std::pair<std::string, std::string>> values);

/// One dialog per (slot combination, modification); combinations vary the
/// last slot fastest. Deterministic and duplicate-free.
std::vector<Dialog> generate_perturbed_dialogs(const PerturbationSpec& spec);

/// Dialog-level accuracy over the perturbed set (response accuracy kept too).
EvalReport perturbation_eval(const ResponsePredictor& predictor, std::span<const Dialog> dialogs);

/// Loads the test (or named) split for `task` from `data_dir`.
std::vector<Dialog> load_task_split(const std::filesystem::path& data_dir, int task, Split split);

}  // namespace memdialog
