// Command-line entry point: data, training, evaluation, benchmarks, serving.

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "memdialog/benchmark.hpp"
#include "memdialog/checkpoint.hpp"
#include "memdialog/evaluation.hpp"
#include "memdialog/fetch.hpp"
#include "memdialog/service.hpp"
#include "memdialog/simulator.hpp"
#include "memdialog/training.hpp"

using namespace memdialog;

namespace {

struct TrainFlags {
  int task = 1;
  std::string data;
  std::string nlg;
  std::string encoding = "position";
  std::optional<double> lr;
  std::optional<std::size_t> dim, hops, hidden, ctx_words, eval_every;
  std::size_t epochs = 100, batch = 32, runs = 1, dummy = 0;
  std::uint64_t seed = 1;
  double init_mean = 1.0, init_std = 0.1, decoder_range = 1.0;
  std::string activation = "tanh";
  bool hidden_bias = false, untied = false, time_on_query = false;
  std::string out;
  std::string metrics;
};

TrainConfig build_config(const TrainFlags& f) {
  auto c = TrainConfig::defaults_for(parse_nlg(f.nlg));
  c.task = f.task;
  c.model.encoding = parse_encoding(f.encoding);
  if (f.lr) c.learning_rate = *f.lr;
  if (f.dim) c.model.dim = *f.dim;
  if (f.hops) c.model.hops = *f.hops;
  if (f.hidden) c.model.hidden = *f.hidden;
  if (f.ctx_words) c.model.context_words = *f.ctx_words;
  if (f.eval_every) c.eval_every = *f.eval_every;
  c.epochs = f.epochs;
  c.batch_size = f.batch;
  c.runs = f.runs;
  c.seed = f.seed;
  c.dummy_candidates = f.dummy;
  c.model.init_mean = f.init_mean;
  c.model.init_std = f.init_std;
  c.model.decoder_init_range = f.decoder_range;
  c.model.activation = parse_activation(f.activation);
  c.model.hidden_bias = f.hidden_bias;
  c.model.untied_embeddings = f.untied;
  c.model.time_on_query = f.time_on_query;
  c.validate();
  return c;
}

int run_train(const TrainFlags& f) {
  const auto config = build_config(f);
  spdlog::info("train config: {}", to_json(config).dump());
  const auto train_dialogs = load_task_split(f.data, config.task, Split::train);
  const auto dev = load_task_split(f.data, config.task, Split::dev);
  const auto cand_path = find_candidates_file(f.data, config.task);
  if (!cand_path) throw std::runtime_error("no candidates file in " + f.data);
  const auto candidates = load_candidates(*cand_path);

  const std::string metrics_path = f.metrics.empty() ? f.out + ".metrics.jsonl" : f.metrics;
  std::ofstream metrics(metrics_path, std::ios::trunc);
  if (!metrics) throw std::runtime_error("cannot write " + metrics_path);

  std::vector<TrainResult> runs;
  double total_seconds = 0.0;
  for (std::size_t r = 0; r < config.runs; ++r) {
    const auto seed = config.seed + r;
    TrainHooks hooks;
    hooks.on_eval = [&](const EvalPoint& p) {
      write_metrics_record(metrics, p, r, seed);
      metrics.flush();
      spdlog::info("run {} epoch {}: loss {:.5f}, val accuracy {:.4f}", r, p.epoch, p.train_loss,
                   p.val_accuracy);
    };
    runs.push_back(train(config, train_dialogs, dev, candidates, seed, hooks));
    total_seconds += runs.back().seconds;
    std::cout << "run " << r << " seed " << seed << ": best val accuracy "
              << fmt::format("{:.2f}", 100.0 * runs.back().best_val_accuracy) << "% at epoch "
              << runs.back().best_epoch << " (" << runs.back().seconds << " s)\n";
  }
  const auto best = best_run(runs);
  auto run_config = config;
  run_config.seed = config.seed + best;
  run_config.runs = 1;
  Checkpoint ckpt{run_config, runs[best].model, runs[best].best_epoch, runs[best].best_val_accuracy,
                  runs[best].history};
  save_checkpoint(f.out, ckpt);
  std::cout << "best run " << best << " saved to " << f.out << " (id " << ckpt.id() << ")\n";
  spdlog::info("total training time {:.1f} s over {} run(s)", total_seconds, runs.size());
  return 0;
}

Checkpoint load_model_checked(const std::string& path, const std::string& expect_nlg,
                              std::string_view entry) {
  auto ckpt = load_checkpoint(path);
  if (!expect_nlg.empty()) require_head(ckpt, parse_nlg(expect_nlg), entry);
  spdlog::info("loaded {} (epoch {}, val accuracy {:.4f})", ckpt.id(), ckpt.epoch, ckpt.val_accuracy);
  return ckpt;
}

void install_stop_handler(HttpFrontend* frontend) {
  static HttpFrontend* active = nullptr;
  active = frontend;
  auto handler = [](int) {
    if (active) active->stop();
  };
  std::signal(SIGINT, handler);
  std::signal(SIGTERM, handler);
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("memdialog"));

  CLI::App app{"Memory Network goal-oriented dialog system"};
  app.set_config("--config", "", "TOML/INI experiment file; command-line flags override it");
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  const char* env_data = std::getenv("DIALOG_BABI_DIR");
  const std::string default_data = env_data ? env_data : "data/dialog-bAbI-tasks";

  // fetch-data
  auto* fetch = app.add_subcommand("fetch-data", "Download and unpack a dataset archive");
  std::string fetch_url, fetch_out = "data", fetch_sha;
  fetch->add_option("--url", fetch_url, "Archive URL")->required();
  fetch->add_option("--out", fetch_out, "Target directory")->capture_default_str();
  fetch->add_option("--sha256", fetch_sha, "Expected SHA-256 (hex); empty skips the check");

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "Write a synthetic task-1 corpus in bAbI format");
  std::string synth_out = "data/synthetic";
  std::size_t synth_dialogs = 1000;
  std::uint64_t synth_seed = 1;
  synth->add_option("--out", synth_out, "Target directory")->capture_default_str();
  synth->add_option("--dialogs", synth_dialogs, "Dialogs per split")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model and save the best checkpoint");
  TrainFlags tf;
  tf.data = default_data;
  train_cmd->add_option("--task", tf.task, "Task 1-6")->check(CLI::Range(1, 6))->capture_default_str();
  train_cmd->add_option("--data", tf.data, "Dataset directory (env DIALOG_BABI_DIR)")->capture_default_str();
  train_cmd->add_option("--nlg", tf.nlg, "candidates | wordbyword")
      ->required()
      ->check(CLI::IsMember({"candidates", "wordbyword"}));
  train_cmd->add_option("--encoding", tf.encoding, "bow | position")
      ->check(CLI::IsMember({"bow", "position"}))
      ->capture_default_str();
  train_cmd->add_option("--lr", tf.lr, "Adam learning rate (candidates 0.0058, wordbyword 0.0022)");
  train_cmd->add_option("--dim", tf.dim, "Embedding size d (candidates 44, wordbyword 59)");
  train_cmd->add_option("--hops", tf.hops, "Memory hops N (candidates 1, wordbyword 3)");
  train_cmd->add_option("--hidden", tf.hidden, "Decoder hidden units H (50)");
  train_cmd->add_option("--ctx-words", tf.ctx_words, "Decoder context words m (1)");
  train_cmd->add_option("--epochs", tf.epochs, "Epochs")->capture_default_str();
  train_cmd->add_option("--eval-every", tf.eval_every, "Validation interval (candidates 5, wordbyword 1)");
  train_cmd->add_option("--batch", tf.batch, "Batch size")->capture_default_str();
  train_cmd->add_option("--seed", tf.seed, "Seed of run 0; run i uses seed+i")->capture_default_str();
  train_cmd->add_option("--runs", tf.runs, "Independent runs; best by validation is saved")->capture_default_str();
  train_cmd->add_option("--dummy-candidates", tf.dummy, "Synthetic candidates to add")->capture_default_str();
  train_cmd->add_option("--init-mean", tf.init_mean, "Mean of the Memory Network init")->capture_default_str();
  train_cmd->add_option("--init-std", tf.init_std, "Std of the Memory Network init")->capture_default_str();
  train_cmd->add_option("--decoder-init-range", tf.decoder_range, "Decoder init is U(-r, r)")->capture_default_str();
  train_cmd->add_option("--activation", tf.activation, "tanh | sigmoid | relu")
      ->check(CLI::IsMember({"tanh", "sigmoid", "relu"}))
      ->capture_default_str();
  train_cmd->add_flag("--hidden-bias", tf.hidden_bias, "Add a decoder hidden-layer bias");
  train_cmd->add_flag("--untied", tf.untied, "Separate embedding table per hop");
  train_cmd->add_flag("--time-on-query", tf.time_on_query, "Temporal keyword on the query too");
  train_cmd->add_option("--out", tf.out, "Checkpoint path")->required();
  train_cmd->add_option("--metrics", tf.metrics, "Metrics log (default <out>.metrics.jsonl)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  std::string eval_model, eval_data = default_data, eval_split = "tst", eval_expect;
  int eval_task = 0;
  bool eval_per_dialog = false, eval_json = false;
  eval_cmd->add_option("--model", eval_model, "Checkpoint")->required();
  eval_cmd->add_option("--task", eval_task, "Task (default: the checkpoint's)");
  eval_cmd->add_option("--data", eval_data, "Dataset directory")->capture_default_str();
  eval_cmd->add_option("--split", eval_split, "trn | dev | tst")
      ->check(CLI::IsMember({"trn", "dev", "tst"}))
      ->capture_default_str();
  eval_cmd->add_flag("--per-dialog", eval_per_dialog, "Also report per-dialog accuracy as R (D)");
  eval_cmd->add_option("--expect-nlg", eval_expect, "Reject checkpoints with another head");
  eval_cmd->add_flag("--json", eval_json, "Print a JSON record");

  // table
  auto* table_cmd = app.add_subcommand("table", "Train and evaluate every results-table cell");
  std::string table_data = default_data, table_budget = "full", table_json;
  table_cmd->add_option("--data", table_data, "Dataset directory")->capture_default_str();
  table_cmd->add_option("--budget", table_budget, "full | epochs=E,runs=R,dialogs=D,seed=S")->capture_default_str();
  table_cmd->add_option("--json", table_json, "Write per-cell records here");

  // perturb
  auto* perturb_cmd = app.add_subcommand("perturb", "Modified-utterance robustness experiment");
  std::vector<std::string> perturb_models;
  std::string perturb_spec = default_perturbation_spec_path().string();
  perturb_cmd->add_option("--model", perturb_models, "Checkpoint(s)")->required();
  perturb_cmd->add_option("--spec", perturb_spec, "Perturbation template file")->capture_default_str();

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Prediction latency and space versus candidate count");
  std::string bench_model, bench_data = default_data, bench_json;
  std::vector<std::size_t> bench_counts = {4212, 10000, 17500, 25000, 35000};
  std::size_t bench_trials = 100, bench_threads = 0;
  bench_cmd->add_option("--model", bench_model, "Checkpoint")->required();
  bench_cmd->add_option("--candidates", bench_counts, "Candidate-set sizes")->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--trials", bench_trials, "Timed predictions per size")
      ->check(CLI::Range(30, 1000000))
      ->capture_default_str();
  bench_cmd->add_option("--data", bench_data, "Dataset for probe subdialogs (synthetic if absent)")->capture_default_str();
  bench_cmd->add_option("--threads", bench_threads, "Also measure concurrent throughput with N threads");
  bench_cmd->add_option("--json", bench_json, "Write structured records here");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "HTTP chat service");
  std::string serve_model, serve_addr = "127.0.0.1:8080", serve_log;
  serve_cmd->add_option("--model", serve_model, "Checkpoint")->envname("MODEL_PATH")->required();
  serve_cmd->add_option("--addr", serve_addr, "host:port")->envname("SERVE_ADDR")->capture_default_str();
  serve_cmd->add_option("--log", serve_log, "Append-only session log for replay");

  // chat
  auto* chat_cmd = app.add_subcommand("chat", "Terminal chat (/silence, /reset, /quit)");
  std::string chat_model;
  chat_cmd->add_option("--model", chat_model, "Checkpoint")->envname("MODEL_PATH")->required();

  // replay
  auto* replay_cmd = app.add_subcommand("replay", "Replay a session log against a checkpoint");
  std::string replay_model, replay_log_path;
  replay_cmd->add_option("--model", replay_model, "Checkpoint")->required();
  replay_cmd->add_option("--log", replay_log_path, "Session log")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);
  for (const auto* sub : app.get_subcommands())
    spdlog::info("{} config:\n{}", sub->get_name(), sub->config_to_str(true, false));

  try {
    if (*fetch) {
      fetch_dataset(fetch_url, fetch_out, fetch_sha);
      return 0;
    }
    if (*synth) {
      write_synthetic_task1(synth_out, synth_dialogs, synth_seed);
      std::cout << "wrote synthetic task-1 corpus to " << synth_out << '\n';
      return 0;
    }
    if (*train_cmd) return run_train(tf);

    if (*eval_cmd) {
      const auto ckpt = load_model_checked(eval_model, eval_expect, "eval");
      const int task = eval_task ? eval_task : ckpt.config.task;
      const auto dialogs = load_task_split(eval_data, task, parse_split(eval_split));
      auto report = evaluate(ModelPredictor(ckpt.model), dialogs, 0);
      report.task = task;
      report.config = ckpt.id();
      if (eval_json) std::cout << report.to_json().dump() << '\n';
      else if (eval_per_dialog) std::cout << report.formatted() << '\n';
      else std::cout << fmt::format("{:.2f}", report.response_percent()) << '\n';
      return 0;
    }

    if (*table_cmd) {
      const auto table = results_table(training_cell_runner(table_data, parse_budget(table_budget)));
      std::cout << table.render();
      if (!table_json.empty()) {
        std::ofstream out(table_json);
        out << table.records().dump(2) << '\n';
      }
      return 0;
    }

    if (*perturb_cmd) {
      const auto dialogs = generate_perturbed_dialogs(load_perturbation_spec(perturb_spec));
      spdlog::info("{} perturbed dialogs", dialogs.size());
      for (const auto& path : perturb_models) {
        const auto ckpt = load_model_checked(path, "", "perturb");
        const auto report = perturbation_eval(ModelPredictor(ckpt.model), dialogs);
        std::cout << to_string(ckpt.config.model.nlg) << ' ' << to_string(ckpt.config.model.encoding)
                  << fmt::format(": per-dialog {:.2f}% (per-response {:.2f}%) ", report.dialog_percent(),
                                 report.response_percent())
                  << path << '\n';
      }
      return 0;
    }

    if (*bench_cmd) {
      const auto ckpt = load_model_checked(bench_model, "", "bench");
      std::vector<Subdialog> probes;
      std::vector<Dialog> dialogs;
      if (find_task_file(bench_data, ckpt.config.task, Split::test))
        dialogs = load_task_split(bench_data, ckpt.config.task, Split::test);
      else
        dialogs = simulate_task1(50, 7);
      for (const auto& d : dialogs)
        for (auto& sd : split_subdialogs(d)) probes.push_back(std::move(sd));
      const auto before = params_checksum(ckpt.model);
      const auto report = measure_prediction_latency(ckpt.model, probes, bench_counts, bench_trials);
      nlohmann::json records = nlohmann::json::array();
      std::cout << "machine: " << report.machine << "\nhead: " << to_string(report.head) << '\n';
      std::cout << "C\tmedian_us\tp95_us\tmean_us\tparam_bytes\tcandidate_bytes\n";
      std::vector<double> xs, ys;
      for (const auto& row : report.rows) {
        SpaceReport space = measure_space(ckpt.model);
        if (report.head == NlgKind::candidates)
          space = measure_space(with_candidate_count(ckpt.model, row.candidates, 0));
        std::cout << row.candidates << '\t' << row.median_us << '\t' << row.p95_us << '\t'
                  << row.mean_us << '\t' << space.parameter_bytes << '\t' << space.candidate_bytes << '\n';
        records.push_back({{"candidates", row.candidates}, {"median_us", row.median_us},
                           {"p95_us", row.p95_us}, {"mean_us", row.mean_us}, {"trials", row.trials},
                           {"parameter_bytes", space.parameter_bytes},
                           {"candidate_bytes", space.candidate_bytes}});
        xs.push_back(static_cast<double>(row.candidates));
        ys.push_back(row.median_us);
      }
      if (xs.size() >= 2) {
        const auto fit = fit_line(xs, ys);
        std::cout << "linear fit: slope " << fit.slope << " us/candidate, R^2 " << fit.r_squared << '\n';
        std::cout << "latency ratio last/first: " << ys.back() / ys.front() << '\n';
      }
      if (bench_threads > 0)
        std::cout << "throughput with " << bench_threads << " threads: "
                  << measure_throughput(ckpt.model, probes, bench_threads, bench_trials) << " predictions/s\n";
      if (params_checksum(ckpt.model) != before) throw std::logic_error("benchmark mutated parameters");
      if (!bench_json.empty()) {
        std::ofstream out(bench_json);
        out << nlohmann::json{{"machine", report.machine}, {"head", to_string(report.head)}, {"rows", records}}.dump(2)
            << '\n';
      }
      return 0;
    }

    if (*serve_cmd) {
      auto ckpt = load_model_checked(serve_model, "", "serve");
      const auto id = ckpt.id();
      auto model = std::make_shared<const DialogModel<float>>(std::move(ckpt.model));
      ChatService service(model, id,
                          serve_log.empty() ? std::nullopt : std::optional<std::filesystem::path>(serve_log));
      HttpFrontend frontend(service);
      const auto [host, port] = parse_address(serve_addr);
      const int bound = frontend.bind(host, port);
      install_stop_handler(&frontend);
      spdlog::info("serving {} on {}:{}", id, host, bound);
      frontend.serve();
      return 0;
    }

    if (*chat_cmd) {
      auto ckpt = load_model_checked(chat_model, "", "chat");
      const auto id = ckpt.id();
      ChatService service(std::make_shared<const DialogModel<float>>(std::move(ckpt.model)), id);
      auto session = service.create_session();
      std::cout << "model " << id << "; /silence sends a silent turn, /reset restarts, /quit exits\n";
      for (std::string line; std::cout << "> " << std::flush, std::getline(std::cin, line);) {
        if (line == "/quit") break;
        if (line == "/reset") {
          service.remove(session);
          session = service.create_session();
          std::cout << "(new session)\n";
          continue;
        }
        if (line == "/silence") line = "<SILENCE>";
        if (tokenize(line).empty()) continue;
        const auto reply = service.post(session, line);
        std::cout << join_tokens(reply.response) << '\n';
        if (!reply.unknown_words.empty())
          std::cout << "  (unknown: " << join_tokens(reply.unknown_words) << ")\n";
      }
      return 0;
    }

    if (*replay_cmd) {
      auto ckpt = load_model_checked(replay_model, "", "replay");
      const auto id = ckpt.id();
      ChatService service(std::make_shared<const DialogModel<float>>(std::move(ckpt.model)), id);
      const auto result = replay_log(replay_log_path, service);
      for (const auto& d : result.details) std::cout << d << '\n';
      std::cout << result.sessions << " sessions, " << result.messages << " messages, "
                << result.mismatches << " mismatches\n";
      return result.mismatches == 0 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
