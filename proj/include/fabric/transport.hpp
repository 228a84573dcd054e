#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "fabric/protocol.hpp"

namespace fabric {

/// JSON-RPC "message/send" envelope carrying exactly one data part whose
/// context_id mirrors the embedded protocol message's thread.
struct Envelope {
  std::uint64_t id = 1;
  std::string message_id;
  ProtocolMessage message;

  Json to_json() const {
    return Json{
        {"jsonrpc", "2.0"},
        {"method", "message/send"},
        {"id", id},
        {"params",
         Json{{"message",
               Json{{"role", "agent"},
                    {"message_id", message_id},
                    {"parts", Json::array({Json{{"kind", "data"},
                                                {"data", message.to_json()}}})},
                    {"context_id", message.thread_id}}}}}};
  }

  static Envelope from_json(const Json& j) {
    if (j.value("jsonrpc", "") != "2.0" || j.value("method", "") != "message/send")
      throw Error("malformed-envelope", "not a message/send request");
    const Json& msg = j.at("params").at("message");
    const Json& parts = msg.at("parts");
    if (!parts.is_array() || parts.size() != 1 ||
        parts[0].value("kind", "") != "data")
      throw Error("malformed-envelope", "exactly one data part required");
    Envelope env;
    env.id = j.value("id", 0ull);
    env.message_id = msg.value("message_id", "");
    env.message = ProtocolMessage::from_json(parts[0].at("data"));
    if (msg.value("context_id", "") != env.message.thread_id)
      throw Error("malformed-envelope", "context_id does not match thread_id");
    return env;
  }
};

/// Discovery document served at /.well-known/agent-card.
struct AgentCard {
  std::string name;
  Did did;
  std::string endpoint;
  std::vector<std::string> supported_protocols{"mutual-auth/1", "attestation/1"};

  Json to_json() const {
    return Json{{"name", name},
                {"did", did.str()},
                {"endpoint", endpoint},
                {"supported_protocols", supported_protocols}};
  }

  static AgentCard from_json(const Json& j) {
    AgentCard c;
    c.name = j.value("name", "");
    if (!j.contains("did")) throw Error("malformed-card", "card missing did");
    c.did = parse_did(j.at("did").get<std::string>());
    c.endpoint = j.at("endpoint").get<std::string>();
    c.supported_protocols =
        j.value("supported_protocols", std::vector<std::string>{});
    return c;
  }
};

struct DeliveryReceipt {
  std::uint64_t response_id = 0;
  bool accepted = false;
  int error_code = 0;  // JSON-RPC error code when not accepted
};

struct TransportStats {
  std::atomic<std::uint64_t> messages{0};
  std::atomic<std::uint64_t> bytes{0};
  std::mutex latency_mutex;
  std::vector<double> latencies_ms;  // one sample per send

  void record(std::size_t body_bytes, double latency_ms) {
    messages.fetch_add(1, std::memory_order_relaxed);
    bytes.fetch_add(body_bytes, std::memory_order_relaxed);
    std::lock_guard lock(latency_mutex);
    latencies_ms.push_back(latency_ms);
  }

  void reset() {
    messages = 0;
    bytes = 0;
    std::lock_guard lock(latency_mutex);
    latencies_ms.clear();
  }
};

/// Accepts a decoded protocol message; returns false for an unknown thread.
using DispatchFn = std::function<bool(const ProtocolMessage&)>;

/// Shared JSON-RPC endpoint logic for both bindings: decode, validate,
/// dispatch by context_id. -32600 malformed, -32001 unknown-thread.
inline Json handle_envelope_rpc(const std::string& body, const DispatchFn& dispatch) {
  Json request = Json::parse(body, nullptr, false);
  std::uint64_t id = request.is_object() ? request.value("id", 0ull) : 0;
  auto error = [&](int code, const std::string& message) {
    return Json{{"jsonrpc", "2.0"},
                {"id", id},
                {"error", Json{{"code", code}, {"message", message}}}};
  };
  if (request.is_discarded()) return error(-32600, "malformed");
  Envelope env;
  try {
    env = Envelope::from_json(request);
  } catch (const std::exception&) {
    return error(-32600, "malformed");
  }
  if (!dispatch(env.message)) return error(-32001, "unknown-thread");
  return Json{{"jsonrpc", "2.0"}, {"id", id}, {"result", Json{{"status", "accepted"}}}};
}

inline DeliveryReceipt receipt_from_response(const Json& response) {
  DeliveryReceipt r;
  r.response_id = response.value("id", 0ull);
  if (response.contains("result")) {
    r.accepted = response["result"].value("status", "") == "accepted";
  } else if (response.contains("error")) {
    r.error_code = response["error"].value("code", 0);
  }
  return r;
}

class Transport {
 public:
  virtual ~Transport() = default;
  /// At-most-once delivery. Throws Error("transport-connect" | "transport-timeout"
  /// | "transport-malformed-response") on wire failures.
  virtual DeliveryReceipt send(const Envelope& envelope,
                               const std::string& endpoint) = 0;

  TransportStats& stats() { return stats_; }

 protected:
  TransportStats stats_;
};

/// Intra-domain delivery: named inboxes, synchronous dispatch. Envelopes
/// still round-trip through their JSON form so byte counts and validation
/// match the HTTP binding.
class InProcessBus : public Transport {
 public:
  void serve(const std::string& endpoint, DispatchFn dispatch) {
    std::lock_guard lock(mutex_);
    endpoints_[endpoint] = std::move(dispatch);
  }

  void serve_card(const std::string& endpoint, AgentCard card) {
    std::lock_guard lock(mutex_);
    cards_[endpoint] = std::move(card);
  }

  DeliveryReceipt send(const Envelope& envelope, const std::string& endpoint) override {
    DispatchFn dispatch;
    {
      std::lock_guard lock(mutex_);
      auto it = endpoints_.find(endpoint);
      if (it == endpoints_.end())
        throw Error("transport-connect", "no inbox at " + endpoint);
      dispatch = it->second;
    }
    std::string body = canonicalize_str(envelope.to_json());
    auto t0 = std::chrono::steady_clock::now();
    Json response = handle_envelope_rpc(body, dispatch);
    double ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    stats_.record(body.size(), ms);
    return receipt_from_response(response);
  }

  AgentCard fetch_card(const std::string& endpoint) const {
    std::lock_guard lock(mutex_);
    auto it = cards_.find(endpoint);
    if (it == cards_.end())
      throw Error("transport-connect", "no card at " + endpoint);
    return it->second;
  }

 private:
  mutable std::mutex mutex_;
  std::map<std::string, DispatchFn> endpoints_;
  std::map<std::string, AgentCard> cards_;
};

/// Cross-domain listener: POST {endpoint}/rpc, GET /.well-known/agent-card.
class HttpAgentServer {
 public:
  HttpAgentServer(DispatchFn dispatch, AgentCard card, int port = 0)
      : card_(std::move(card)) {
    server_.Post("/rpc", [dispatch](const httplib::Request& req,
                                    httplib::Response& res) {
      Json response = handle_envelope_rpc(req.body, dispatch);
      res.set_content(response.dump(), "application/json");
    });
    server_.Get("/.well-known/agent-card",
                [this](const httplib::Request&, httplib::Response& res) {
                  res.set_content(card_.to_json().dump(), "application/json");
                });
    if (port == 0) {
      port_ = server_.bind_to_any_port("127.0.0.1");
    } else {
      if (!server_.bind_to_port("127.0.0.1", port))
        throw Error("bind-error", "cannot bind port " + std::to_string(port));
      port_ = port;
    }
    if (port_ <= 0) throw Error("bind-error", "cannot bind a listening port");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    card_.endpoint = endpoint();
  }

  ~HttpAgentServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  HttpAgentServer(const HttpAgentServer&) = delete;
  HttpAgentServer& operator=(const HttpAgentServer&) = delete;

  int port() const { return port_; }
  std::string endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port_);
  }

 private:
  httplib::Server server_;
  AgentCard card_;
  std::thread thread_;
  int port_ = 0;
};

class HttpTransport : public Transport {
 public:
  explicit HttpTransport(int timeout_ms = 5000) : timeout_ms_(timeout_ms) {}

  DeliveryReceipt send(const Envelope& envelope, const std::string& endpoint) override {
    httplib::Client client(endpoint);
    client.set_connection_timeout(0, timeout_ms_ * 1000);
    client.set_read_timeout(timeout_ms_ / 1000, timeout_ms_ % 1000 * 1000);
    std::string body = canonicalize_str(envelope.to_json());
    auto t0 = std::chrono::steady_clock::now();
    auto result = client.Post("/rpc", body, "application/json");
    double ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    if (!result) {
      if (result.error() == httplib::Error::ConnectionTimeout ||
          result.error() == httplib::Error::Read)
        throw Error("transport-timeout", endpoint);
      throw Error("transport-connect", endpoint);
    }
    stats_.record(body.size(), ms);
    Json response = Json::parse(result->body, nullptr, false);
    if (response.is_discarded())
      throw Error("transport-malformed-response", endpoint);
    return receipt_from_response(response);
  }

 private:
  int timeout_ms_;
};

inline AgentCard fetch_agent_card(const std::string& endpoint,
                                  int timeout_ms = 5000) {
  httplib::Client client(endpoint);
  client.set_connection_timeout(0, timeout_ms * 1000);
  auto result = client.Get("/.well-known/agent-card");
  if (!result) throw Error("transport-connect", endpoint);
  Json j = Json::parse(result->body, nullptr, false);
  if (j.is_discarded()) throw Error("transport-malformed-response", endpoint);
  try {
    return AgentCard::from_json(j);
  } catch (const Error&) {
    throw Error("transport-malformed-response", "card at " + endpoint);
  }
}

}  // namespace fabric
