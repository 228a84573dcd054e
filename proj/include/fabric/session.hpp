#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "fabric/protocol.hpp"
#include "fabric/transport.hpp"

namespace fabric {

/// One agent's end of one protocol thread: the state machine, its context,
/// and the addressing needed to forward outgoing messages. Event processing
/// is serialized per peer, preserving in-thread ordering on any binding.
/// Every fed event and emitted message lands in the trace, which is what the
/// transport-equivalence check compares field-for-field.
class AgentPeer {
 public:
  AgentPeer(std::string label, PartyContext ctx)
      : label_(std::move(label)), ctx_(std::move(ctx)) {}

  void host_handshake(Role role) {
    HandshakeState s;
    s.role = role;
    machine_ = s;
  }

  void host_attestation(AttestationRole role) {
    AttestationState s;
    s.role = role;
    s.handshake.role =
        role == AttestationRole::kRequester ? Role::kInitiator : Role::kResponder;
    machine_ = s;
  }

  void bind(Transport* transport, std::string peer_address) {
    transport_ = transport;
    peer_address_ = std::move(peer_address);
  }

  PartyContext& context() { return ctx_; }
  const std::string& label() const { return label_; }

  void start() { process(Event::start()); }
  void timeout() { process(Event::timeout()); }

  /// Endpoint dispatch: true when this peer owns the message's thread (or it
  /// legitimately opens one).
  DispatchFn dispatcher() {
    return [this](const ProtocolMessage& m) {
      if (!accepts(m)) return false;
      process(Event::incoming(m));
      return true;
    };
  }

  bool accepts(const ProtocolMessage& m) const {
    std::lock_guard lock(mutex_);
    const std::string& thread = thread_id_unlocked();
    if (thread.empty()) return m.kind == MsgKind::kAuthRequest;
    return m.thread_id == thread;
  }

  bool terminal() const {
    std::lock_guard lock(mutex_);
    if (transport_failed_) return true;
    if (const auto* h = std::get_if<HandshakeState>(&machine_))
      return h->authenticated() || h->failed();
    const auto& a = std::get<AttestationState>(machine_);
    return a.done() || a.failed();
  }

  HandshakeState handshake_state() const {
    std::lock_guard lock(mutex_);
    if (const auto* h = std::get_if<HandshakeState>(&machine_)) return *h;
    return std::get<AttestationState>(machine_).handshake;
  }

  AttestationState attestation_state() const {
    std::lock_guard lock(mutex_);
    return std::get<AttestationState>(machine_);
  }

  std::string failure_reason() const {
    std::lock_guard lock(mutex_);
    if (transport_failed_) return "transport";
    if (const auto* h = std::get_if<HandshakeState>(&machine_))
      return h->failure_reason;
    return std::get<AttestationState>(machine_).failure_reason;
  }

  Json trace() const {
    std::lock_guard lock(mutex_);
    return trace_;
  }

 private:
  const std::string& thread_id_unlocked() const {
    if (const auto* h = std::get_if<HandshakeState>(&machine_))
      return h->thread_id;
    return std::get<AttestationState>(machine_).handshake.thread_id;
  }

  void process(const Event& event) {
    std::vector<ProtocolMessage> outgoing;
    {
      std::lock_guard lock(mutex_);
      if (transport_failed_) return;
      record_event(event);
      if (auto* h = std::get_if<HandshakeState>(&machine_)) {
        auto result = handshake_step(*h, event, ctx_);
        *h = std::move(result.state);
        outgoing = std::move(result.outgoing);
      } else {
        auto& a = std::get<AttestationState>(machine_);
        auto result = attestation_step(a, event, ctx_);
        a = std::move(result.state);
        outgoing = std::move(result.outgoing);
      }
      for (const auto& m : outgoing) record_message("out", m);
    }
    forward(outgoing);
  }

  void record_event(const Event& e) {
    if (e.kind == Event::Kind::kMessage) {
      record_message("in", e.message);
    } else {
      trace_.push_back(Json{
          {"side", label_},
          {"dir", e.kind == Event::Kind::kStart ? "start" : "timeout"}});
    }
  }

  void record_message(const std::string& dir, const ProtocolMessage& m) {
    Json entry{{"side", label_}, {"dir", dir}, {"message", m.to_json()}};
    if (const auto* h = std::get_if<HandshakeState>(&machine_)) {
      entry["phase"] = to_string(h->phase);
    } else {
      const auto& a = std::get<AttestationState>(machine_);
      entry["phase"] = to_string(a.handshake.phase);
      entry["attestation_phase"] = to_string(a.phase);
    }
    trace_.push_back(std::move(entry));
  }

  void forward(const std::vector<ProtocolMessage>& outgoing) {
    if (!transport_ || outgoing.empty()) return;
    for (const auto& m : outgoing) {
      Envelope env;
      env.id = m.sequence;
      env.message_id = ctx_.rng->next_uuid();
      env.message = m;
      try {
        transport_->send(env, peer_address_);
      } catch (const Error&) {
        std::lock_guard lock(mutex_);
        transport_failed_ = true;
        return;
      }
    }
  }

  std::string label_;
  PartyContext ctx_;
  std::variant<HandshakeState, AttestationState> machine_{HandshakeState{}};
  Transport* transport_ = nullptr;
  std::string peer_address_;
  bool transport_failed_ = false;
  Json trace_ = Json::array();
  mutable std::mutex mutex_;
};

/// Polls until every peer is terminal; injects a local timeout event after
/// the deadline. In-process sessions cascade synchronously inside start(),
/// so the loop exits immediately there.
inline bool wait_for_completion(const std::vector<AgentPeer*>& peers,
                                int timeout_ms = 5000) {
  auto deadline =
      std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  while (true) {
    bool all = true;
    for (auto* p : peers)
      if (!p->terminal()) all = false;
    if (all) return true;
    if (std::chrono::steady_clock::now() >= deadline) {
      for (auto* p : peers)
        if (!p->terminal()) p->timeout();
      return false;
    }
    std::this_thread::sleep_for(std::chrono::microseconds(200));
  }
}

struct CrossAuthResult {
  bool authenticated = false;
  std::string failure_reason;
  std::optional<Did> peer;
  std::map<std::string, Json> peer_claims;
  ClaimDecision claims_decision;
};

/// Inter-domain mutual authentication from the initiator's side: discover
/// the responder via its agent card, run the handshake over the wire, and
/// evaluate the authenticated peer's claims under the initiator's policy.
/// The responder must already be serving (it owns its own state machine).
inline CrossAuthResult cross_domain_auth(AgentPeer& initiator,
                                         const std::string& responder_endpoint,
                                         Transport& transport,
                                         int timeout_ms = 5000) {
  std::string address = responder_endpoint;
  if (auto* bus = dynamic_cast<InProcessBus*>(&transport)) {
    bus->fetch_card(responder_endpoint);  // discovery parity with http
  } else {
    AgentCard card = fetch_agent_card(responder_endpoint);
    address = card.endpoint;
  }
  initiator.host_handshake(Role::kInitiator);
  initiator.bind(&transport, address);
  initiator.start();
  wait_for_completion({&initiator}, timeout_ms);

  CrossAuthResult out;
  HandshakeState s = initiator.handshake_state();
  out.authenticated = s.authenticated();
  out.failure_reason = initiator.failure_reason();
  out.peer = s.peer;
  out.peer_claims = s.peer_claims;
  if (out.authenticated) {
    Json merged = Json::object();
    for (const auto& [descriptor, claims] : s.peer_claims)
      for (const auto& [k, v] : claims.items()) merged[k] = v;
    out.claims_decision = evaluate_claims(merged, initiator.context().policy);
  }
  return out;
}

}  // namespace fabric
