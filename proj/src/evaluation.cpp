#include "memdialog/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#ifndef MEMDIALOG_DATA_DIR
#define MEMDIALOG_DATA_DIR "data"
#endif

namespace memdialog {

using nlohmann::json;

double EvalReport::response_percent() const {
  return responses ? 100.0 * static_cast<double>(correct_responses) / static_cast<double>(responses)
                   : 0.0;
}

double EvalReport::dialog_percent() const {
  return dialogs ? 100.0 * static_cast<double>(correct_dialogs) / static_cast<double>(dialogs) : 0.0;
}

std::string format_accuracy(double response_percent, double dialog_percent) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f (%.2f)", response_percent, dialog_percent);
  return buf;
}

std::string EvalReport::formatted() const {
  return format_accuracy(response_percent(), dialog_percent());
}

json EvalReport::to_json() const {
  return {{"task", task},
          {"config", config},
          {"responses", responses},
          {"correct_responses", correct_responses},
          {"dialogs", dialogs},
          {"correct_dialogs", correct_dialogs},
          {"response_accuracy", response_percent()},
          {"dialog_accuracy", dialog_percent()},
          {"formatted", formatted()}};
}

EvalReport evaluate(const ResponsePredictor& predictor, std::span<const Dialog> dialogs,
                    std::size_t threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(dialogs.size(), 1));

  struct Counts {
    std::size_t responses = 0, correct = 0, dialogs_ok = 0;
  };
  std::vector<Counts> partial(threads);
  std::atomic<std::size_t> next{0};
  auto worker = [&](std::size_t w) {
    for (std::size_t i = next++; i < dialogs.size(); i = next++) {
      bool all = true;
      for (const auto& sd : split_subdialogs(dialogs[i])) {
        ++partial[w].responses;
        if (predictor.respond(sd) == sd.gold) ++partial[w].correct;
        else all = false;
      }
      if (all) ++partial[w].dialogs_ok;
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
  }

  EvalReport r;
  r.dialogs = dialogs.size();
  for (const auto& c : partial) {
    r.responses += c.responses;
    r.correct_responses += c.correct;
    r.correct_dialogs += c.dialogs_ok;
  }
  return r;
}

double response_accuracy(const ResponsePredictor& predictor, std::span<const Dialog> dialogs) {
  return evaluate(predictor, dialogs).response_percent() / 100.0;
}

double dialog_accuracy(const ResponsePredictor& predictor, std::span<const Dialog> dialogs) {
  return evaluate(predictor, dialogs).dialog_percent() / 100.0;
}

// ---------------------------------------------------------------------------

std::string TableRow::label() const {
  return "task " + std::to_string(task) + (dummy_candidates ? " *" : "");
}

std::string TableColumn::label() const {
  return std::string(to_string(nlg)) + " " + std::string(to_string(encoding));
}

std::vector<TableRow> table_rows() {
  std::vector<TableRow> rows;
  for (int t = 1; t <= 6; ++t) rows.push_back({t, false});
  rows.push_back({1, true});
  return rows;
}

std::vector<TableColumn> table_columns() {
  return {{NlgKind::candidates, EncodingMode::bow},
          {NlgKind::candidates, EncodingMode::position},
          {NlgKind::word_by_word, EncodingMode::bow},
          {NlgKind::word_by_word, EncodingMode::position}};
}

ResultsTable results_table(const CellRunner& runner) {
  ResultsTable t{table_rows(), table_columns(), {}};
  for (const auto& row : t.rows) {
    auto& cells = t.cells.emplace_back();
    for (const auto& col : t.columns) {
      try {
        cells.push_back(runner(row, col));
      } catch (const std::exception& e) {
        cells.push_back({std::nullopt, e.what()});
      }
      const auto& c = cells.back();
      if (c.report)
        spdlog::info("{} / {}: {}", row.label(), col.label(), c.report->formatted());
      else
        spdlog::warn("{} / {}: skipped ({})", row.label(), col.label(), c.skip_reason);
    }
  }
  return t;
}

std::string ResultsTable::render() const {
  std::vector<std::vector<std::string>> grid;
  grid.push_back({""});
  for (const auto& c : columns) grid[0].push_back(c.label());
  std::vector<std::string> notes;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto& line = grid.emplace_back();
    line.push_back(rows[r].label());
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto& cell = cells[r][c];
      if (cell.report) {
        line.push_back(cell.report->formatted());
      } else {
        line.push_back("skipped");
        notes.push_back(rows[r].label() + ", " + columns[c].label() + ": " + cell.skip_reason);
      }
    }
  }
  std::vector<std::size_t> width(grid[0].size(), 0);
  for (const auto& line : grid)
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  std::ostringstream out;
  for (const auto& line : grid) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i == 0) out << line[i] << std::string(width[i] - line[i].size(), ' ');
      else out << "  " << std::string(width[i] - line[i].size(), ' ') << line[i];
    }
    out << '\n';
  }
  if (rows.size() == 7) out << "* with dummy candidates\n";
  for (const auto& n : notes) out << "skipped " << n << '\n';
  return out.str();
}

json ResultsTable::records() const {
  json out = json::array();
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < columns.size(); ++c) {
      json rec = {{"row", rows[r].label()},
                  {"task", rows[r].task},
                  {"dummy_candidates", rows[r].dummy_candidates},
                  {"nlg", to_string(columns[c].nlg)},
                  {"encoding", to_string(columns[c].encoding)}};
      const auto& cell = cells[r][c];
      if (cell.report) {
        rec["status"] = "ok";
        rec["result"] = cell.report->to_json();
      } else {
        rec["status"] = "skipped";
        rec["reason"] = cell.skip_reason;
      }
      out.push_back(std::move(rec));
    }
  return out;
}

TableBudget parse_budget(std::string_view spec) {
  TableBudget b;
  if (spec.empty() || spec == "full") return b;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    const auto comma = std::min(spec.find(',', pos), spec.size());
    const auto item = spec.substr(pos, comma - pos);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument("budget item '" + std::string(item) + "' is not key=value");
    const auto key = item.substr(0, eq);
    const auto text = item.substr(eq + 1);
    std::uint64_t value = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size())
      throw std::invalid_argument("budget value '" + std::string(text) + "' is not a number");
    if (key == "epochs") b.epochs = value;
    else if (key == "runs") b.runs = value;
    else if (key == "dialogs") b.max_train_dialogs = value;
    else if (key == "seed") b.seed = value;
    else throw std::invalid_argument("unknown budget key '" + std::string(key) + "'");
    pos = comma + 1;
  }
  if (b.epochs == 0 || b.runs == 0) throw std::invalid_argument("budget epochs and runs must be positive");
  return b;
}

std::size_t fit_eval_every(std::size_t epochs, std::size_t preferred) {
  for (std::size_t e = std::min(preferred, epochs); e > 1; --e)
    if (epochs % e == 0) return e;
  return 1;
}

std::vector<Dialog> load_task_split(const std::filesystem::path& data_dir, int task, Split split) {
  const auto path = find_task_file(data_dir, task, split);
  if (!path)
    throw std::runtime_error("missing dataset file: dialog-babi-task" + std::to_string(task) + "-*-" +
                             std::string(to_string(split)) + ".txt in " + data_dir.string());
  return load_dialog_file(*path);
}

CellRunner training_cell_runner(std::filesystem::path data_dir, TableBudget budget) {
  return [data_dir = std::move(data_dir), budget](const TableRow& row,
                                                  const TableColumn& col) -> CellResult {
    for (Split s : {Split::train, Split::dev, Split::test})
      if (!find_task_file(data_dir, row.task, s))
        return {std::nullopt, "missing dataset file dialog-babi-task" + std::to_string(row.task) +
                                  "-*-" + std::string(to_string(s)) + ".txt"};
    const auto cand_path = find_candidates_file(data_dir, row.task);
    if (!cand_path) return {std::nullopt, "missing candidates file"};

    auto train_dialogs = load_task_split(data_dir, row.task, Split::train);
    if (budget.max_train_dialogs && train_dialogs.size() > budget.max_train_dialogs)
      train_dialogs.resize(budget.max_train_dialogs);
    const auto dev = load_task_split(data_dir, row.task, Split::dev);
    const auto test = load_task_split(data_dir, row.task, Split::test);

    auto config = TrainConfig::defaults_for(col.nlg);
    config.task = row.task;
    config.model.encoding = col.encoding;
    config.epochs = budget.epochs;
    config.eval_every = fit_eval_every(budget.epochs, config.eval_every);
    config.runs = budget.runs;
    config.seed = budget.seed;
    if (row.dummy_candidates) config.dummy_candidates = 30788;

    const auto runs = train_runs(config, train_dialogs, dev, load_candidates(*cand_path));
    const auto& best = runs[best_run(runs)];
    auto report = evaluate(ModelPredictor(best.model), test);
    report.task = row.task;
    report.config = row.label() + " " + col.label();
    return {report, ""};
  };
}

// ---------------------------------------------------------------------------

PerturbationSpec parse_perturbation_spec(std::string_view json_text) {
  PerturbationSpec spec;
  try {
    const auto j = nlohmann::ordered_json::parse(json_text);
    for (const auto& pair : j.at("template"))
      spec.dialog_template.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
    for (const auto& [name, values] : j.at("slots").items())
      spec.slots.emplace_back(name, values.get<std::vector<std::string>>());
    for (const auto& m : j.at("modifications"))
      spec.modifications.push_back({m.at("turn").get<std::size_t>(), m.at("user").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad perturbation spec: ") + e.what());
  }
  if (spec.dialog_template.empty() || spec.slots.empty() || spec.modifications.empty())
    throw std::invalid_argument("perturbation spec needs a template, slots and modifications");
  for (const auto& m : spec.modifications)
    if (m.turn == 0 || m.turn > spec.dialog_template.size())
      throw std::invalid_argument("modification turn " + std::to_string(m.turn) + " outside template");
  for (const auto& [name, values] : spec.slots)
    if (values.empty()) throw std::invalid_argument("slot '" + name + "' has no values");
  return spec;
}

PerturbationSpec load_perturbation_spec(const std::filesystem::path& path) {
  return parse_perturbation_spec(read_text_file(path));
}

std::filesystem::path default_perturbation_spec_path() {
  return std::filesystem::path(MEMDIALOG_DATA_DIR) / "perturbation.json";
}

std::string fill_slots(std::string_view pattern,
                       std::span<const std::pair<std::string, std::string>> values) {
  std::string out(pattern);
  for (const auto& [name, value] : values) {
    const std::string key = "{" + name + "}";
    for (auto at = out.find(key); at != std::string::npos; at = out.find(key, at + value.size()))
      out.replace(at, key.size(), value);
  }
  if (out.find('{') != std::string::npos)
    throw std::invalid_argument("unfilled placeholder in '" + out + "'");
  return out;
}

std::vector<Dialog> generate_perturbed_dialogs(const PerturbationSpec& spec) {
  std::size_t combos = 1;
  for (const auto& s : spec.slots) combos *= s.second.size();

  std::vector<Dialog> out;
  out.reserve(combos * spec.modifications.size());
  std::vector<std::pair<std::string, std::string>> values(spec.slots.size());
  for (std::size_t c = 0; c < combos; ++c) {
    std::size_t rest = c;
    for (std::size_t s = spec.slots.size(); s-- > 0;) {
      const auto& options = spec.slots[s].second;
      values[s] = {spec.slots[s].first, options[rest % options.size()]};
      rest /= options.size();
    }
    for (const auto& mod : spec.modifications) {
      Dialog d;
      for (std::size_t t = 0; t < spec.dialog_template.size(); ++t) {
        const auto& [user, system] = spec.dialog_template[t];
        const auto& u = (t + 1 == mod.turn) ? mod.user : user;
        d.events.emplace_back(Exchange{tokenize(fill_slots(u, values)), tokenize(fill_slots(system, values))});
      }
      out.push_back(std::move(d));
    }
  }
  return out;
}

EvalReport perturbation_eval(const ResponsePredictor& predictor, std::span<const Dialog> dialogs) {
  auto r = evaluate(predictor, dialogs, 0);
  r.config = "perturbed dialogs";
  return r;
}

}  // namespace memdialog
