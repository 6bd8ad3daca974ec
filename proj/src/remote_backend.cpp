#include "cgr/remote_backend.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cgr/error.hpp"

namespace cgr {

using nlohmann::json;

TokenDistribution decode_next_response(std::string_view body, std::size_t step_index,
                                       std::size_t top_k) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("candidates") || !j.at("candidates").is_array()) {
    throw ProtocolError("response lacks a 'candidates' array");
  }
  const auto& cands = j.at("candidates");
  if (cands.empty()) throw ProtocolError("response has no candidates");

  TokenDistribution dist;
  dist.step_index = step_index;
  for (const auto& c : cands) {
    if (!c.is_object() || !c.contains("id") || !c.at("id").is_number_integer() ||
        !c.contains("logprob") || !c.at("logprob").is_number()) {
      throw ProtocolError("candidate needs integer 'id' and numeric 'logprob'");
    }
    const double lp = c.at("logprob").get<double>();
    if (std::isnan(lp) || lp > 1e-9) throw ProtocolError("logprob must be <= 0");
    Token tok{c.at("id").get<TokenId>(), c.value("text", std::string{})};
    dist.candidates.push_back({std::move(tok), std::min(1.0, std::exp(lp))});
  }
  canonicalize(dist, top_k);
  return dist;
}

std::string encode_next_request(ContextView context, std::size_t top_k) {
  json j = {{"context_ids", std::vector<TokenId>(context.tokens.begin(), context.tokens.end())},
            {"top_k", top_k},
            {"prompt_length", context.prompt_length}};
  return j.dump();
}

struct RemoteBackend::Pool {
  std::string endpoint;
  std::chrono::milliseconds timeout;
  std::mutex mutex;
  std::vector<std::unique_ptr<httplib::Client>> idle;

  std::unique_ptr<httplib::Client> acquire() {
    {
      std::lock_guard lock(mutex);
      if (!idle.empty()) {
        auto c = std::move(idle.back());
        idle.pop_back();
        return c;
      }
    }
    auto c = std::make_unique<httplib::Client>(endpoint);
    if (!c->is_valid()) throw ConfigError("invalid backend endpoint '" + endpoint + "'");
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    c->set_connection_timeout(secs.count(), usecs.count());
    c->set_read_timeout(secs.count(), usecs.count());
    c->set_write_timeout(secs.count(), usecs.count());
    c->set_keep_alive(true);
    return c;
  }

  void release(std::unique_ptr<httplib::Client> c) {
    std::lock_guard lock(mutex);
    idle.push_back(std::move(c));
  }
};

RemoteBackend::RemoteBackend(RemoteConfig config)
    : config_(std::move(config)), pool_(std::make_unique<Pool>()) {
  pool_->endpoint = config_.endpoint;
  pool_->timeout = config_.timeout;

  auto single = [&](const std::string& text, const char* what) {
    auto toks = tokenize(text);
    if (toks.size() != 1) {
      throw ProtocolError(std::string(what) + " text must map to exactly one server token");
    }
    return toks.front();
  };
  specials_.end_think = single(config_.end_think_text, "end_think");
  specials_.end_of_sequence = single(config_.end_of_sequence_text, "end_of_sequence");
  specials_.wait_text = config_.wait_text;
  specials_.answer_prefix_text = config_.answer_prefix_text;
  specials_.answer_close_text = config_.answer_close_text;
  if (tokenize(specials_.wait_text).empty()) throw ProtocolError("wait_text tokenizes to nothing");
}

RemoteBackend::~RemoteBackend() = default;

std::string RemoteBackend::post(const std::string& path, const std::string& body) const {
  auto client = pool_->acquire();
  auto res = client->Post(path, body, "application/json");
  if (!res) {
    throw BackendUnavailable("POST " + config_.endpoint + path + " failed: " +
                             httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw BackendUnavailable("POST " + config_.endpoint + path + " returned HTTP " +
                                 std::to_string(res->status),
                             res->status);
  }
  std::string out = std::move(res->body);
  pool_->release(std::move(client));
  return out;
}

void RemoteBackend::remember(const std::vector<Token>& tokens) const {
  std::lock_guard lock(texts_mutex_);
  for (const auto& t : tokens) texts_.emplace(t.id, t.text);
}

std::vector<Token> RemoteBackend::tokenize(std::string_view text) const {
  if (text.empty()) return {};
  const auto body = post("/v1/tokenize", json{{"text", text}}.dump());
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("tokenize response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("ids") || !j.contains("texts") || !j.at("ids").is_array() ||
      !j.at("texts").is_array() || j.at("ids").size() != j.at("texts").size()) {
    throw ProtocolError("tokenize response needs equal-length 'ids' and 'texts'");
  }
  std::vector<Token> out;
  try {
    for (std::size_t i = 0; i < j.at("ids").size(); ++i) {
      out.push_back({j.at("ids")[i].get<TokenId>(), j.at("texts")[i].get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("bad tokenize response: ") + e.what());
  }
  remember(out);
  return out;
}

std::string RemoteBackend::detokenize(std::span<const TokenId> ids) const {
  std::lock_guard lock(texts_mutex_);
  std::string out;
  for (TokenId id : ids) {
    auto it = texts_.find(id);
    if (it == texts_.end()) throw TokenizationError("token id " + std::to_string(id) + " never seen");
    out += it->second;
  }
  return out;
}

TokenDistribution RemoteBackend::next_distribution(ContextView context, std::size_t top_k) const {
  if (top_k == 0) throw InputError("top_k must be at least 1");
  auto dist = decode_next_response(post("/v1/next", encode_next_request(context, top_k)),
                                   context.step(), top_k);
  std::vector<Token> seen;
  for (const auto& c : dist.candidates) {
    if (!c.token.text.empty()) seen.push_back(c.token);
  }
  remember(seen);
  return dist;
}

TokenDistribution remote_next(const RemoteBackend& client, ContextView context, std::size_t top_k) {
  return client.next_distribution(context, top_k);
}

// ---------------------------------------------------------------------------

struct StubServer::Impl {
  std::shared_ptr<const Backend> backend;
  httplib::Server server;
  std::thread thread;
  std::string host;
  int port = 0;
  std::atomic<std::size_t> served{0};
};

namespace {

void reply_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", message}}.dump(), "application/json");
}

}  // namespace

StubServer::StubServer(std::shared_ptr<const Backend> backend) : impl_(std::make_unique<Impl>()) {
  impl_->backend = std::move(backend);
  auto* impl = impl_.get();

  impl_->server.Post("/v1/next", [impl](const httplib::Request& req, httplib::Response& res) {
    ++impl->served;
    try {
      const auto j = json::parse(req.body);
      const auto ids = j.at("context_ids").get<std::vector<TokenId>>();
      const auto top_k = j.at("top_k").get<std::size_t>();
      const auto prompt_length = j.value("prompt_length", std::size_t{0});
      if (prompt_length > ids.size()) return reply_error(res, 400, "prompt_length exceeds context");
      const auto dist = impl->backend->next_distribution({ids, prompt_length}, top_k);
      json cands = json::array();
      for (const auto& c : dist.candidates) {
        const double lp = c.probability > 0.0 ? std::log(c.probability) : -1e300;
        cands.push_back({{"id", c.token.id}, {"text", c.token.text}, {"logprob", lp}});
      }
      res.set_content(json{{"candidates", cands}}.dump(), "application/json");
    } catch (const ContextOverflow& e) {
      reply_error(res, 413, e.what());
    } catch (const std::exception& e) {
      reply_error(res, 400, e.what());
    }
  });

  impl_->server.Post("/v1/tokenize", [impl](const httplib::Request& req, httplib::Response& res) {
    ++impl->served;
    try {
      const auto j = json::parse(req.body);
      const auto toks = impl->backend->tokenize(j.at("text").get<std::string>());
      json ids = json::array();
      json texts = json::array();
      for (const auto& t : toks) {
        ids.push_back(t.id);
        texts.push_back(t.text);
      }
      res.set_content(json{{"ids", ids}, {"texts", texts}}.dump(), "application/json");
    } catch (const std::exception& e) {
      reply_error(res, 400, e.what());
    }
  });
}

StubServer::~StubServer() { stop(); }

int StubServer::start(const std::string& host, int port) {
  impl_->host = host;
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(host);
  } else {
    impl_->port = impl_->server.bind_to_port(host, port) ? port : -1;
  }
  if (impl_->port <= 0) throw BackendUnavailable("cannot bind stub server on " + host);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void StubServer::listen(const std::string& host, int port) {
  impl_->host = host;
  impl_->port = port;
  if (!impl_->server.listen(host, port)) {
    throw BackendUnavailable("cannot listen on " + host + ":" + std::to_string(port));
  }
}

void StubServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string StubServer::endpoint() const {
  return "http://" + impl_->host + ":" + std::to_string(impl_->port);
}

std::size_t StubServer::requests_served() const { return impl_->served.load(); }

}  // namespace cgr
