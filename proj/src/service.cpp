#include "memdialog/service.hpp"

#include <charconv>
#include <cstdio>
#include <random>
#include <sstream>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "memdialog/numerics.hpp"

namespace memdialog {

using nlohmann::json;

json ChatReply::to_json() const {
  return {{"session_id", session_id},
          {"response", join_tokens(response)},
          {"attention", attention},
          {"unknown_words", unknown_words},
          {"history_length", history_length}};
}

json SessionView::to_json() const {
  json h = json::array();
  for (const auto& u : history)
    h.push_back({{"speaker", to_string(u.speaker)}, {"text", join_tokens(u.tokens)}});
  return {{"session_id", id}, {"created_at", created_at}, {"history", h}};
}

ChatService::ChatService(std::shared_ptr<const DialogModel<float>> model, std::string model_id,
                         std::optional<std::filesystem::path> log_path)
    : model_(std::move(model)), model_id_(std::move(model_id)), id_salt_(std::random_device{}()) {
  if (log_path) {
    log_.emplace(*log_path, std::ios::app);
    if (!*log_) throw std::runtime_error("cannot open session log " + log_path->string());
  }
}

void ChatService::require_model() const {
  if (!model_) throw ServiceUnavailable("no model loaded");
}

void ChatService::log(const json& record) {
  if (!log_) return;
  std::lock_guard lock(log_mutex_);
  *log_ << record.dump() << '\n';
  log_->flush();
}

std::string ChatService::create_session() {
  require_model();
  auto session = std::make_shared<Session>();
  session->created_at = std::chrono::duration_cast<std::chrono::seconds>(
                            std::chrono::system_clock::now().time_since_epoch())
                            .count();
  std::string id;
  {
    std::unique_lock lock(sessions_mutex_);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(derive_seed(id_salt_ + next_session_++, "session")));
    id = buf;
    sessions_.emplace(id, session);
  }
  log({{"event", "create"}, {"session", id}});
  return id;
}

std::shared_ptr<ChatService::Session> ChatService::find(const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw SessionNotFound("unknown session '" + id + "'");
  return it->second;
}

ChatReply ChatService::post(const std::string& id, std::string_view text) {
  require_model();
  auto session = find(id);
  const auto query = tokenize(text);
  if (query.empty()) throw BadRequest("empty message; send \"<SILENCE>\" for a silent turn");

  ChatReply reply;
  reply.session_id = id;
  {
    std::lock_guard lock(session->mutex);
    const auto ex = model_->encode(session->history, query, &reply.unknown_words);
    auto prediction = model_->predict(ex);
    reply.response = std::move(prediction.response);
    for (const auto& hop : prediction.attention)
      reply.attention.emplace_back(hop.begin(), hop.end());
    session->history.push_back({Speaker::user, query});
    session->history.push_back({Speaker::system, reply.response});
    reply.history_length = session->history.size();
  }
  log({{"event", "message"},
       {"session", id},
       {"user", std::string(text)},
       {"system", join_tokens(reply.response)}});
  return reply;
}

SessionView ChatService::get(const std::string& id) const {
  require_model();
  auto session = find(id);
  std::lock_guard lock(session->mutex);
  return {id, session->created_at, session->history};
}

void ChatService::remove(const std::string& id) {
  require_model();
  {
    std::unique_lock lock(sessions_mutex_);
    if (sessions_.erase(id) == 0) throw SessionNotFound("unknown session '" + id + "'");
  }
  log({{"event", "delete"}, {"session", id}});
}

std::size_t ChatService::session_count() const {
  std::shared_lock lock(sessions_mutex_);
  return sessions_.size();
}

ReplayResult replay_log(const std::filesystem::path& log_path, ChatService& service) {
  std::ifstream in(log_path);
  if (!in) throw std::runtime_error("cannot open session log " + log_path.string());
  ReplayResult result;
  std::map<std::string, std::string> live;  // logged id -> replay id
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(log_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const auto event = rec.at("event").get<std::string>();
    const auto logged = rec.at("session").get<std::string>();
    if (event == "create") {
      live[logged] = service.create_session();
      ++result.sessions;
    } else if (event == "message") {
      const auto it = live.find(logged);
      if (it == live.end())
        throw std::runtime_error("log line " + std::to_string(line_no) + ": message for unknown session");
      const auto reply = join_tokens(service.post(it->second, rec.at("user").get<std::string>()).response);
      ++result.messages;
      const auto expected = rec.at("system").get<std::string>();
      if (reply != expected) {
        ++result.mismatches;
        result.details.push_back("line " + std::to_string(line_no) + ": expected '" + expected +
                                 "', got '" + reply + "'");
      }
    } else if (event == "delete") {
      live.erase(logged);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

std::pair<std::string, int> parse_address(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos)
    throw std::invalid_argument("address '" + std::string(address) + "' needs host:port");
  int port = -1;
  const auto text = address.substr(colon + 1);
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), port);
  if (ec != std::errc{} || end != text.data() + text.size() || port < 0 || port > 65535)
    throw std::invalid_argument("bad port in address '" + std::string(address) + "'");
  std::string host(address.substr(0, colon));
  if (host.empty()) host = "0.0.0.0";
  return {host, port};
}

struct HttpFrontend::Impl {
  ChatService& service;
  httplib::Server server;
  explicit Impl(ChatService& s) : service(s) {}
};

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const SessionNotFound& e) {
    send_json(res, 404, {{"error", e.what()}});
  } catch (const BadRequest& e) {
    send_json(res, 400, {{"error", e.what()}});
  } catch (const ServiceUnavailable& e) {
    send_json(res, 503, {{"error", e.what()}});
  } catch (const json::exception& e) {
    send_json(res, 400, {{"error", std::string("bad request body: ") + e.what()}});
  } catch (const std::exception& e) {
    spdlog::error("request failed: {}", e.what());
    send_json(res, 500, {{"error", e.what()}});
  }
}

}  // namespace

HttpFrontend::HttpFrontend(ChatService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  auto& svc = impl_->service;

  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});

  srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  srv.Get("/health", [&svc](const httplib::Request&, httplib::Response& res) {
    if (!svc.has_model()) send_json(res, 503, {{"status", "unavailable"}, {"error", "no model loaded"}});
    else send_json(res, 200, {{"status", "ok"}, {"model", svc.model_id()}});
  });

  srv.Post("/sessions", [&svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 201, {{"session_id", svc.create_session()}}); });
  });

  srv.Post(R"(/sessions/([^/]+)/messages)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = json::parse(req.body);
      if (!body.is_object() || !body.contains("text") || !body["text"].is_string())
        throw BadRequest("body must be {\"text\": \"...\"}");
      send_json(res, 200, svc.post(req.matches[1], body["text"].get<std::string>()).to_json());
    });
  });

  srv.Get(R"(/sessions/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, svc.get(req.matches[1]).to_json()); });
  });

  srv.Delete(R"(/sessions/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      svc.remove(req.matches[1]);
      send_json(res, 200, {{"deleted", std::string(req.matches[1])}});
    });
  });

  srv.set_logger([](const httplib::Request& req, const httplib::Response& res) {
    spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
  });
}

HttpFrontend::~HttpFrontend() { stop(); }

int HttpFrontend::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) bound = impl_->server.bind_to_any_port(host);
  else if (!impl_->server.bind_to_port(host, port)) bound = -1;
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpFrontend::serve() {
  if (!impl_->server.listen_after_bind()) spdlog::debug("http server stopped");
}

void HttpFrontend::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace memdialog
