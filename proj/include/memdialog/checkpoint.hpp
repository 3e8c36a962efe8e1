#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "memdialog/model.hpp"
#include "memdialog/training.hpp"

namespace memdialog {

inline constexpr char kCheckpointMagic[8] = {'M', 'D', 'L', 'G', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
/// Not a checkpoint (bad magic) or structurally malformed.
class CheckpointFormatError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointTruncatedError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointChecksumError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
/// Checkpoint holds a different head than the caller needs.
class CheckpointMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

struct Checkpoint {
  TrainConfig config;
  DialogModel<float> model;
  std::size_t epoch = 0;
  double val_accuracy = 0.0;
  std::vector<EvalPoint> history;

  /// "<nlg>-<encoding>-task<N>-<16 hex digits of the parameter checksum>".
  std::string id() const;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvalPoint& p);

/// Layout: magic, u32 version, u64 metadata length, metadata (JSON text),
/// u32 tensor count, per tensor {u16 name length, name, u32 rows, u32 cols,
/// rows*cols float32}, u32 CRC-32 of everything before it. Little-endian.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws CheckpointMismatchError naming both heads when they differ.
void require_head(const Checkpoint& ckpt, NlgKind needed, std::string_view entry_point);

/// One JSON line per eval point.
void write_metrics_record(std::ostream& out, const EvalPoint& p, std::size_t run,
                          std::uint64_t seed);

}  // namespace memdialog
