#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "cgr/backend.hpp"

namespace cgr {

struct RemoteConfig {
  /// Base address, e.g. "http://127.0.0.1:8080".
  std::string endpoint;
  std::chrono::milliseconds timeout{30000};
  /// Declared by the operator; a remote server cannot prove it.
  bool deterministic = false;
  std::string end_think_text = "</think>";
  std::string end_of_sequence_text = "<|eos|>";
  std::string wait_text = "\nWait";
  std::string answer_prefix_text = "Final Answer: \\boxed{";
  std::string answer_close_text = "}";
};

/// Decodes a /v1/next response body. Log-probabilities become probabilities
/// by exponentiation. Throws ProtocolError on malformed or empty bodies.
TokenDistribution decode_next_response(std::string_view body, std::size_t step_index,
                                       std::size_t top_k);

/// Body of a /v1/next request.
std::string encode_next_request(ContextView context, std::size_t top_k);

/// Client for a model server speaking the /v1/next and /v1/tokenize protocol.
///
/// Special-token ids are resolved through /v1/tokenize at construction, so
/// constructing a client doubles as a reachability check.
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig config);
  ~RemoteBackend() override;

  std::vector<Token> tokenize(std::string_view text) const override;
  std::string detokenize(std::span<const TokenId> ids) const override;
  TokenDistribution next_distribution(ContextView context, std::size_t top_k) const override;
  const SpecialTokens& specials() const override { return specials_; }
  bool deterministic() const override { return config_.deterministic; }

  const RemoteConfig& config() const { return config_; }

 private:
  struct Pool;
  std::string post(const std::string& path, const std::string& body) const;
  void remember(const std::vector<Token>& tokens) const;

  RemoteConfig config_;
  SpecialTokens specials_;
  std::unique_ptr<Pool> pool_;
  mutable std::mutex texts_mutex_;
  mutable std::unordered_map<TokenId, std::string> texts_;
};

/// One request per call; equivalent to backend.next_distribution.
TokenDistribution remote_next(const RemoteBackend& client, ContextView context, std::size_t top_k);

/// In-process HTTP server exposing a Backend over the wire protocol.
/// Used as a test fixture and by the stub-server tool.
class StubServer {
 public:
  explicit StubServer(std::shared_ptr<const Backend> backend);
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  /// Binds to host on an ephemeral port (or `port` if non-zero) and starts
  /// serving on a background thread. Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks serving on the calling thread.
  void listen(const std::string& host, int port);
  void stop();
  std::string endpoint() const;
  std::size_t requests_served() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cgr
