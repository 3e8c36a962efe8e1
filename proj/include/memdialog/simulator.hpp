#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "memdialog/corpus.hpp"

namespace memdialog {

/// Restaurant-booking dialogs in the style of bAbI task 1: greeting, a
/// request naming 0-4 of the slots, questions for each missing slot (cuisine,
/// location, number, price), then the api_call. Deterministic in `seed`.
std::vector<Dialog> simulate_task1(std::size_t count, std::uint64_t seed);

/// Every system response the simulator can produce (7 fixed + 300 api_calls).
CandidateSet task1_candidates();

/// bAbI text format: numbered lines, user and system separated by a tab,
/// blank line between dialogs.
std::string format_dialogs(std::span<const Dialog> dialogs);
std::string format_candidates(const CandidateSet& candidates);

/// Writes dialog-babi-task1-synthetic-{trn,dev,tst}.txt and
/// dialog-babi-candidates.txt into `dir`. Splits use derived seeds.
void write_synthetic_task1(const std::filesystem::path& dir, std::size_t dialogs_per_split,
                           std::uint64_t seed);

}  // namespace memdialog
