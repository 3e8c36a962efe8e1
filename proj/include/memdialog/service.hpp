#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "memdialog/corpus.hpp"
#include "memdialog/model.hpp"

namespace memdialog {

class SessionNotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class BadRequest : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ServiceUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ChatReply {
  std::string session_id;
  Tokens response;
  std::vector<std::vector<double>> attention;  // [hop][history utterance]
  std::vector<std::string> unknown_words;
  std::size_t history_length = 0;  // after appending both utterances

  nlohmann::json to_json() const;
};

struct SessionView {
  std::string id;
  std::int64_t created_at = 0;  // unix seconds
  std::vector<Utterance> history;

  nlohmann::json to_json() const;
};

/// In-memory chat sessions over one read-only model. Each session is
/// mutated under its own mutex; different sessions proceed in parallel.
class ChatService {
 public:
  /// No model: every session operation throws ServiceUnavailable.
  ChatService() = default;
  ChatService(std::shared_ptr<const DialogModel<float>> model, std::string model_id,
              std::optional<std::filesystem::path> log_path = std::nullopt);

  bool has_model() const { return model_ != nullptr; }
  const std::string& model_id() const { return model_id_; }

  std::string create_session();
  /// Empty text throws BadRequest; the literal "<SILENCE>" is a silent turn.
  ChatReply post(const std::string& id, std::string_view text);
  SessionView get(const std::string& id) const;
  void remove(const std::string& id);
  std::size_t session_count() const;

 private:
  struct Session {
    std::mutex mutex;
    std::int64_t created_at = 0;
    std::vector<Utterance> history;
  };
  std::shared_ptr<Session> find(const std::string& id) const;
  void require_model() const;
  void log(const nlohmann::json& record);

  std::shared_ptr<const DialogModel<float>> model_;
  std::string model_id_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_session_ = 0;
  std::uint64_t id_salt_ = 0;
  std::mutex log_mutex_;
  std::optional<std::ofstream> log_;
};

struct ReplayResult {
  std::size_t sessions = 0;
  std::size_t messages = 0;
  std::size_t mismatches = 0;
  std::vector<std::string> details;  // one line per mismatch
};

/// Re-posts every logged user turn to fresh sessions on `service` and
/// compares the replies with the logged ones.
ReplayResult replay_log(const std::filesystem::path& log_path, ChatService& service);

/// JSON/HTTP front end: POST /sessions, POST /sessions/{id}/messages,
/// GET and DELETE /sessions/{id}, GET /health. Permissive CORS.
class HttpFrontend {
 public:
  explicit HttpFrontend(ChatService& service);
  ~HttpFrontend();
  HttpFrontend(const HttpFrontend&) = delete;
  HttpFrontend& operator=(const HttpFrontend&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port, throws on failure.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Splits "host:port" (port required).
std::pair<std::string, int> parse_address(std::string_view address);

}  // namespace memdialog
