#include "memdialog/benchmark.hpp"

#include <sys/utsname.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace memdialog {

void gen_dummy_candidates(std::size_t n, CandidateSet& set, Vocabulary* vocab) {
  if (n == 0) return;
  std::size_t width = 5;
  for (std::size_t limit = 100000; n > limit; limit *= 10) ++width;
  for (std::size_t i = 0; i < n; ++i) {
    Tokens response{"dummy"};
    std::size_t value = i;
    std::vector<int> digits(width, 0);
    for (std::size_t p = width; p-- > 0; value /= 10) digits[p] = static_cast<int>(value % 10);
    for (std::size_t p = 0; p < width; ++p)
      response.push_back("dummy_p" + std::to_string(p) + "_" + std::to_string(digits[p]));
    if (vocab)
      for (const auto& w : response) vocab->add(w);
    set.add(std::move(response));
  }
}

DialogModel<float> with_candidate_count(const DialogModel<float>& model, std::size_t target_size,
                                        std::uint64_t seed) {
  if (model.config().nlg != NlgKind::candidates)
    throw std::invalid_argument("with_candidate_count: model has no candidate head");
  const std::size_t base = model.candidates().size();
  if (target_size < base)
    throw std::invalid_argument("with_candidate_count: target " + std::to_string(target_size) +
                                " below the model's " + std::to_string(base) + " candidates");
  CandidateSet candidates = model.candidates();
  Vocabulary vocab = model.vocabulary();
  gen_dummy_candidates(target_size - base, candidates, &vocab);

  DialogModel<float> out(model.config(), std::move(vocab), std::move(candidates),
                         model.preprocessing(), seed);
  auto src = model.params().tensors();
  auto dst = out.params().tensors();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto& from = *src[i].tensor;
    auto& to = *dst[i].tensor;
    for (std::size_t r = 0; r < from.rows(); ++r)
      std::copy(from.row(r).begin(), from.row(r).end(), to.row(r).begin());
  }
  out.refresh();
  return out;
}

namespace {

double percentile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
}

LatencyRow time_predictions(const DialogModel<float>& model, std::span<const Subdialog> probes,
                            std::size_t trials, std::size_t warmup) {
  using clock = std::chrono::steady_clock;
  volatile std::size_t sink = 0;
  for (std::size_t i = 0; i < warmup; ++i)
    sink = sink + model.respond(probes[i % probes.size()]).size();
  std::vector<double> samples;
  samples.reserve(trials);
  for (std::size_t i = 0; i < trials; ++i) {
    const auto start = clock::now();
    sink = sink + model.respond(probes[i % probes.size()]).size();
    samples.push_back(std::chrono::duration<double, std::micro>(clock::now() - start).count());
  }
  LatencyRow row;
  row.trials = trials;
  row.median_us = percentile(samples, 0.5);
  row.p95_us = percentile(samples, 0.95);
  double total = 0.0;
  for (double s : samples) total += s;
  row.mean_us = total / static_cast<double>(samples.size());
  return row;
}

}  // namespace

LatencyReport measure_prediction_latency(const DialogModel<float>& model,
                                         std::span<const Subdialog> probes,
                                         std::span<const std::size_t> candidate_counts,
                                         std::size_t trials, std::size_t warmup) {
  if (probes.empty()) throw std::invalid_argument("latency: no probe subdialogs");
  if (trials == 0) throw std::invalid_argument("latency: trials must be positive");
  LatencyReport report;
  report.head = model.config().nlg;
  report.machine = machine_descriptor();
  for (std::size_t count : candidate_counts) {
    LatencyRow row;
    if (model.config().nlg == NlgKind::candidates) {
      const auto padded = with_candidate_count(model, count, derive_seed(count, "bench"));
      row = time_predictions(padded, probes, trials, warmup);
    } else {
      // Resident but unused by the decoder.
      CandidateSet resident;
      gen_dummy_candidates(count, resident);
      row = time_predictions(model, probes, trials, warmup);
    }
    row.candidates = count;
    report.rows.push_back(row);
  }
  return report;
}

double measure_throughput(const DialogModel<float>& model, std::span<const Subdialog> probes,
                          std::size_t threads, std::size_t predictions_per_thread) {
  if (probes.empty() || threads == 0) throw std::invalid_argument("throughput: bad arguments");
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < threads; ++t)
    workers.emplace_back([&, t] {
      for (std::size_t i = 0; i < predictions_per_thread; ++i)
        (void)model.respond(probes[(t + i) % probes.size()]);
    });
  for (auto& w : workers) w.join();
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return static_cast<double>(threads * predictions_per_thread) / seconds;
}

std::size_t tensor_block_bytes(std::size_t rows, std::size_t cols, std::size_t name_length) {
  // u16 name length, name, u32 rows, u32 cols, float32 payload
  return 2 + name_length + 4 + 4 + 4 * rows * cols;
}

SpaceReport measure_space(const DialogModel<float>& model) {
  SpaceReport r;
  for (const auto& t : model.params().tensors())
    r.parameter_bytes += tensor_block_bytes(t.tensor->rows(), t.tensor->cols(), t.name.size());
  if (model.config().nlg == NlgKind::candidates) {
    const auto& head = model.candidate_head();
    r.candidate_bytes = head.encoded().size() * sizeof(float);
    for (const auto& bow : head.bows()) r.candidate_bytes += bow.active.size() * sizeof(int);
  }
  return r;
}

LinearFit fit_line(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("fit_line: need at least two paired points");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: x values are all equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

std::string machine_descriptor() {
  std::string cpu = "unknown cpu";
  std::ifstream info("/proc/cpuinfo");
  for (std::string line; std::getline(info, line);)
    if (line.starts_with("model name")) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) cpu = line.substr(colon + 2);
      break;
    }
  std::string kernel = "unknown os";
  utsname u{};
  if (uname(&u) == 0) kernel = std::string(u.sysname) + " " + u.release + " " + u.machine;
  return cpu + "; " + std::to_string(std::thread::hardware_concurrency()) + " hw threads; " +
         kernel;
}

std::uint64_t params_checksum(const DialogModel<float>& model) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& t : model.params().tensors())
    for (float v : t.tensor->values()) {
      std::uint32_t bits = 0;
      std::memcpy(&bits, &v, sizeof bits);
      for (int b = 0; b < 4; ++b) {
        h ^= (bits >> (8 * b)) & 0xFFu;
        h *= 1099511628211ULL;
      }
    }
  return h;
}

}  // namespace memdialog
