#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fabric/presentation.hpp"
#include "fabric/wallet.hpp"

namespace fabric {

enum class MsgKind {
  kAuthRequest,
  kAuthResponse,
  kAuthComplete,
  kAuthAck,
  kCredManifestRequest,
  kCredManifest,
  kCredApplication,
  kCredFulfillment,
  kAbort,
};

inline std::string to_string(MsgKind k) {
  switch (k) {
    case MsgKind::kAuthRequest: return "AUTH_REQUEST";
    case MsgKind::kAuthResponse: return "AUTH_RESPONSE";
    case MsgKind::kAuthComplete: return "AUTH_COMPLETE";
    case MsgKind::kAuthAck: return "AUTH_ACK";
    case MsgKind::kCredManifestRequest: return "CRED_MANIFEST_REQUEST";
    case MsgKind::kCredManifest: return "CRED_MANIFEST";
    case MsgKind::kCredApplication: return "CRED_APPLICATION";
    case MsgKind::kCredFulfillment: return "CRED_FULFILLMENT";
    case MsgKind::kAbort: return "ABORT";
  }
  return "?";
}

inline std::optional<MsgKind> msg_kind_from(const std::string& s) {
  static const std::map<std::string, MsgKind> table{
      {"AUTH_REQUEST", MsgKind::kAuthRequest},
      {"AUTH_RESPONSE", MsgKind::kAuthResponse},
      {"AUTH_COMPLETE", MsgKind::kAuthComplete},
      {"AUTH_ACK", MsgKind::kAuthAck},
      {"CRED_MANIFEST_REQUEST", MsgKind::kCredManifestRequest},
      {"CRED_MANIFEST", MsgKind::kCredManifest},
      {"CRED_APPLICATION", MsgKind::kCredApplication},
      {"CRED_FULFILLMENT", MsgKind::kCredFulfillment},
      {"ABORT", MsgKind::kAbort}};
  auto it = table.find(s);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

struct ProtocolMessage {
  std::string thread_id;
  std::uint64_t sequence = 0;
  MsgKind kind = MsgKind::kAbort;
  Json body = Json::object();

  bool operator==(const ProtocolMessage&) const = default;

  Json to_json() const {
    return Json{{"thread_id", thread_id},
                {"sequence", sequence},
                {"kind", to_string(kind)},
                {"body", body}};
  }

  static ProtocolMessage from_json(const Json& j) {
    ProtocolMessage m;
    m.thread_id = j.at("thread_id").get<std::string>();
    m.sequence = j.at("sequence").get<std::uint64_t>();
    auto kind = msg_kind_from(j.at("kind").get<std::string>());
    if (!kind) throw Error("malformed-message", "unknown kind");
    m.kind = *kind;
    m.body = j.value("body", Json::object());
    return m;
  }
};

/// Credential Manifest subset: what the issuer hands out and what an
/// applicant must have presented to get it.
struct CredentialManifest {
  std::string manifest_id;
  Did issuer;
  struct OutputDescriptor {
    std::string credential_type;
    Json claim_template;
    bool operator==(const OutputDescriptor&) const = default;
  };
  std::vector<OutputDescriptor> output_descriptors;
  PresentationDefinition presentation_definition;

  bool operator==(const CredentialManifest&) const = default;

  Json to_json() const {
    Json outs = Json::array();
    for (const auto& o : output_descriptors)
      outs.push_back({{"credential_type", o.credential_type},
                      {"claim_template", o.claim_template}});
    return Json{{"manifest_id", manifest_id},
                {"issuer", issuer.str()},
                {"output_descriptors", outs},
                {"presentation_definition", presentation_definition.to_json()}};
  }

  static CredentialManifest from_json(const Json& j) {
    CredentialManifest m;
    m.manifest_id = j.at("manifest_id").get<std::string>();
    m.issuer = parse_did(j.at("issuer").get<std::string>());
    for (const auto& o : j.at("output_descriptors"))
      m.output_descriptors.push_back(
          {o.at("credential_type").get<std::string>(), o.at("claim_template")});
    m.presentation_definition =
        PresentationDefinition::from_json(j.at("presentation_definition"));
    return m;
  }
};

enum class HandshakePhase {
  kStart,
  kAwaitResponse,
  kAwaitComplete,
  kAwaitAck,
  kAuthenticated,
  kFailed,
};

inline std::string to_string(HandshakePhase p) {
  switch (p) {
    case HandshakePhase::kStart: return "START";
    case HandshakePhase::kAwaitResponse: return "AWAIT_RESPONSE";
    case HandshakePhase::kAwaitComplete: return "AWAIT_COMPLETE";
    case HandshakePhase::kAwaitAck: return "AWAIT_ACK";
    case HandshakePhase::kAuthenticated: return "AUTHENTICATED";
    case HandshakePhase::kFailed: return "FAILED";
  }
  return "?";
}

enum class Role { kInitiator, kResponder };

/// Mutual-authentication state. AUTHENTICATED is reachable only after this
/// side verified the peer's presentation AND its own presentation was
/// acknowledged (the ack itself is signed, so an injected AUTH_ACK cannot
/// fake the peer's verification). `peer` is set only once the inbound
/// presentation verified.
struct HandshakeState {
  Role role = Role::kInitiator;
  HandshakePhase phase = HandshakePhase::kStart;
  std::string thread_id;
  std::uint64_t last_sequence = 0;
  Challenge issued_challenge;              // ours, the peer proves against it
  Challenge peer_challenge;                // theirs, we prove against it
  std::optional<Did> peer;
  std::map<std::string, Json> peer_claims;  // by descriptor_id
  std::string failure_reason;

  bool authenticated() const { return phase == HandshakePhase::kAuthenticated; }
  bool failed() const { return phase == HandshakePhase::kFailed; }
};

/// Everything a state machine needs from the agent hosting it. The challenge
/// store and rng are the only mutable pieces; transitions are otherwise pure
/// functions of (state, event).
struct PartyContext {
  Did did;
  KeyPair keys;
  Wallet* wallet = nullptr;
  Resolver* resolver = nullptr;
  const TrustRegistry* registry = nullptr;
  PresentationDefinition peer_definition;  // what the peer must present
  ClaimPolicy policy;                      // applied to verified peer claims
  ChallengeStore* challenges = nullptr;
  LogicalClock* clock = nullptr;
  DeterministicRng* rng = nullptr;
  // issuer side of an attestation
  std::optional<CredentialManifest> manifest;
  Json rvc_claim_template = Json::object();
};

struct Event {
  enum class Kind { kStart, kMessage, kTimeout };
  Kind kind = Kind::kMessage;
  ProtocolMessage message;

  static Event start() { return {Kind::kStart, {}}; }
  static Event timeout() { return {Kind::kTimeout, {}}; }
  static Event incoming(ProtocolMessage m) { return {Kind::kMessage, std::move(m)}; }
};

template <typename State>
struct StepResult {
  State state;
  std::vector<ProtocolMessage> outgoing;
};

namespace detail {

inline ProtocolMessage make_message(HandshakeState& s, MsgKind kind, Json body) {
  return ProtocolMessage{s.thread_id, ++s.last_sequence, kind, std::move(body)};
}

inline StepResult<HandshakeState> fail_with_abort(HandshakeState s,
                                                  const std::string& reason) {
  s.phase = HandshakePhase::kFailed;
  s.failure_reason = reason;
  ProtocolMessage abort = make_message(s, MsgKind::kAbort, Json{{"reason", reason}});
  return {std::move(s), {std::move(abort)}};
}

inline StepResult<HandshakeState> fail_silently(HandshakeState s,
                                                const std::string& reason) {
  s.phase = HandshakePhase::kFailed;
  s.failure_reason = reason;
  return {std::move(s), {}};
}

inline Bytes ack_payload(const std::string& thread_id,
                         const std::string& challenge_nonce) {
  return canonicalize(Json{{"thread_id", thread_id},
                           {"status", "ok"},
                           {"challenge", challenge_nonce}});
}

/// Build this side's presentation answering the peer's definition.
inline std::optional<ProtocolMessage> build_vp_message(
    HandshakeState& s, PartyContext& ctx, const PresentationDefinition& pd,
    const Challenge& challenge, const Did& verifier, MsgKind kind, Json extra,
    std::string& error_out) {
  try {
    Selection sel = select_credentials(*ctx.wallet, pd);
    VerifiablePresentation vp = create_presentation(
        ctx.keys, ctx.did, sel, pd.pd_id, challenge, verifier, *ctx.clock);
    Json body = std::move(extra);
    body["vp"] = vp.to_json();
    return make_message(s, kind, std::move(body));
  } catch (const Error& e) {
    error_out = e.code();
    return std::nullopt;
  }
}

}  // namespace detail

/// One transition of the mutual-authentication machine. Total: every
/// (state, event) pair yields a successor state, with failures expressed as
/// FAILED(reason) plus an ABORT to the peer. No retries: a failed thread is
/// terminal.
inline StepResult<HandshakeState> handshake_step(const HandshakeState& state,
                                                 const Event& event,
                                                 PartyContext& ctx) {
  HandshakeState s = state;

  if (event.kind == Event::Kind::kTimeout) {
    if (s.phase == HandshakePhase::kAuthenticated ||
        s.phase == HandshakePhase::kFailed)
      return {std::move(s), {}};
    return detail::fail_silently(std::move(s), "timeout");
  }

  if (event.kind == Event::Kind::kStart) {
    if (s.role != Role::kInitiator || s.phase != HandshakePhase::kStart)
      return detail::fail_with_abort(std::move(s), "protocol-error");
    s.thread_id = ctx.rng->next_uuid();
    s.issued_challenge = make_challenge(*ctx.rng, *ctx.clock);
    ctx.challenges->issue(s.issued_challenge);
    ProtocolMessage req = detail::make_message(
        s, MsgKind::kAuthRequest,
        Json{{"did", ctx.did.str()},
             {"challenge", s.issued_challenge.to_json()},
             {"presentation_definition", ctx.peer_definition.to_json()}});
    s.phase = HandshakePhase::kAwaitResponse;
    return {std::move(s), {std::move(req)}};
  }

  const ProtocolMessage& msg = event.message;
  if (s.phase == HandshakePhase::kFailed) return {std::move(s), {}};
  if (!s.thread_id.empty() && msg.thread_id != s.thread_id)
    return detail::fail_with_abort(std::move(s), "protocol-error");
  if (msg.sequence <= s.last_sequence)
    return detail::fail_with_abort(std::move(s), "protocol-error");
  s.last_sequence = msg.sequence;

  if (msg.kind == MsgKind::kAbort) {
    std::string reason = msg.body.value("reason", "peer-abort");
    return detail::fail_silently(std::move(s), "peer-abort(" + reason + ")");
  }

  switch (s.phase) {
    case HandshakePhase::kStart: {
      if (s.role != Role::kResponder || msg.kind != MsgKind::kAuthRequest)
        return detail::fail_with_abort(std::move(s), "protocol-error");
      s.thread_id = msg.thread_id;
      Did initiator;
      PresentationDefinition asked;
      Challenge their_challenge;
      try {
        initiator = parse_did(msg.body.at("did").get<std::string>());
        asked = PresentationDefinition::from_json(
            msg.body.at("presentation_definition"));
        their_challenge = Challenge::from_json(msg.body.at("challenge"));
      } catch (const std::exception&) {
        return detail::fail_with_abort(std::move(s), "protocol-error");
      }
      s.peer_challenge = their_challenge;
      s.issued_challenge = make_challenge(*ctx.rng, *ctx.clock, initiator.str());
      ctx.challenges->issue(s.issued_challenge);
      std::string err;
      auto reply = detail::build_vp_message(
          s, ctx, asked, their_challenge, initiator, MsgKind::kAuthResponse,
          Json{{"challenge", s.issued_challenge.to_json()},
               {"presentation_definition", ctx.peer_definition.to_json()}},
          err);
      if (!reply) return detail::fail_with_abort(std::move(s), err);
      s.phase = HandshakePhase::kAwaitComplete;
      return {std::move(s), {std::move(*reply)}};
    }

    case HandshakePhase::kAwaitResponse: {
      if (msg.kind != MsgKind::kAuthResponse)
        return detail::fail_with_abort(std::move(s), "protocol-error");
      VerifiablePresentation vp;
      PresentationDefinition asked;
      Challenge their_challenge;
      try {
        vp = VerifiablePresentation::from_json(msg.body.at("vp"));
        asked = PresentationDefinition::from_json(
            msg.body.at("presentation_definition"));
        their_challenge = Challenge::from_json(msg.body.at("challenge"));
      } catch (const std::exception&) {
        return detail::fail_with_abort(std::move(s), "protocol-error");
      }
      PresentationOutcome outcome = verify_presentation(
          vp, ctx.peer_definition, s.issued_challenge, ctx.did, *ctx.resolver,
          *ctx.registry, *ctx.challenges, *ctx.clock);
      if (!outcome) return detail::fail_with_abort(std::move(s), outcome.reason);
      s.peer = vp.holder;
      s.peer_claims = outcome.claims;
      s.peer_challenge = their_challenge;
      std::string err;
      auto complete =
          detail::build_vp_message(s, ctx, asked, their_challenge, vp.holder,
                                   MsgKind::kAuthComplete, Json::object(), err);
      if (!complete) return detail::fail_with_abort(std::move(s), err);
      s.phase = HandshakePhase::kAwaitAck;
      return {std::move(s), {std::move(*complete)}};
    }

    case HandshakePhase::kAwaitComplete: {
      if (msg.kind != MsgKind::kAuthComplete)
        return detail::fail_with_abort(std::move(s), "protocol-error");
      VerifiablePresentation vp;
      try {
        vp = VerifiablePresentation::from_json(msg.body.at("vp"));
      } catch (const std::exception&) {
        return detail::fail_with_abort(std::move(s), "protocol-error");
      }
      PresentationOutcome outcome = verify_presentation(
          vp, ctx.peer_definition, s.issued_challenge, ctx.did, *ctx.resolver,
          *ctx.registry, *ctx.challenges, *ctx.clock);
      if (!outcome) return detail::fail_with_abort(std::move(s), outcome.reason);
      s.peer = vp.holder;
      s.peer_claims = outcome.claims;
      Bytes payload = detail::ack_payload(s.thread_id, s.issued_challenge.nonce);
      ProtocolMessage ack = detail::make_message(
          s, MsgKind::kAuthAck,
          Json{{"status", "ok"},
               {"ack_jws", sign_detached(payload, ctx.keys).compact_form()}});
      s.phase = HandshakePhase::kAuthenticated;
      return {std::move(s), {std::move(ack)}};
    }

    case HandshakePhase::kAwaitAck: {
      if (msg.kind != MsgKind::kAuthAck)
        return detail::fail_with_abort(std::move(s), "protocol-error");
      if (msg.body.value("status", "") != "ok" || !s.peer)
        return detail::fail_with_abort(std::move(s), "bad-ack");
      // the ack proves the peer verified our presentation: it signs our
      // nonce exchange under its authenticated key
      auto peer_doc = ctx.resolver->try_resolve(*s.peer);
      if (!peer_doc) return detail::fail_with_abort(std::move(s), "bad-ack");
      Bytes payload = detail::ack_payload(s.thread_id, s.peer_challenge.nonce);
      bool ok = false;
      for (const auto& key_id : peer_doc->authentication) {
        auto pk = peer_doc->authentication_key(key_id);
        if (pk && verify_detached_compact(payload, msg.body.value("ack_jws", ""),
                                          *pk)) {
          ok = true;
          break;
        }
      }
      if (!ok) return detail::fail_with_abort(std::move(s), "bad-ack");
      s.phase = HandshakePhase::kAuthenticated;
      return {std::move(s), {}};
    }

    case HandshakePhase::kAuthenticated:
    case HandshakePhase::kFailed:
      return detail::fail_with_abort(std::move(s), "protocol-error");
  }
  return detail::fail_with_abort(std::move(s), "protocol-error");
}

enum class AttestationPhase {
  kAwaitAuth,
  kAwaitManifest,
  kAwaitApplication,
  kAwaitFulfillment,
  kDone,
  kFailed,
};

inline std::string to_string(AttestationPhase p) {
  switch (p) {
    case AttestationPhase::kAwaitAuth: return "AWAIT_AUTH";
    case AttestationPhase::kAwaitManifest: return "AWAIT_MANIFEST";
    case AttestationPhase::kAwaitApplication: return "AWAIT_APPLICATION";
    case AttestationPhase::kAwaitFulfillment: return "AWAIT_FULFILLMENT";
    case AttestationPhase::kDone: return "DONE";
    case AttestationPhase::kFailed: return "FAILED";
  }
  return "?";
}

enum class AttestationRole { kRequester, kIssuer };

/// Issuance dialogue layered on a completed handshake. Every phase beyond
/// AWAIT_AUTH re-checks handshake.authenticated(); a fulfillment can never
/// be produced for a half-authenticated peer.
struct AttestationState {
  AttestationRole role = AttestationRole::kRequester;
  AttestationPhase phase = AttestationPhase::kAwaitAuth;
  HandshakeState handshake;
  std::optional<CredentialManifest> manifest;
  std::string failure_reason;

  bool done() const { return phase == AttestationPhase::kDone; }
  bool failed() const { return phase == AttestationPhase::kFailed; }
};

namespace detail {

inline StepResult<AttestationState> att_fail_with_abort(AttestationState s,
                                                        const std::string& reason) {
  s.phase = AttestationPhase::kFailed;
  s.failure_reason = reason;
  ProtocolMessage abort{s.handshake.thread_id, ++s.handshake.last_sequence,
                        MsgKind::kAbort, Json{{"reason", reason}}};
  return {std::move(s), {std::move(abort)}};
}

inline StepResult<AttestationState> att_fail_silently(AttestationState s,
                                                      const std::string& reason) {
  s.phase = AttestationPhase::kFailed;
  s.failure_reason = reason;
  return {std::move(s), {}};
}

inline bool is_auth_kind(MsgKind k) {
  return k == MsgKind::kAuthRequest || k == MsgKind::kAuthResponse ||
         k == MsgKind::kAuthComplete || k == MsgKind::kAuthAck;
}

}  // namespace detail

inline StepResult<AttestationState> attestation_step(const AttestationState& state,
                                                     const Event& event,
                                                     PartyContext& ctx) {
  AttestationState s = state;

  if (event.kind == Event::Kind::kTimeout) {
    if (s.phase == AttestationPhase::kDone || s.phase == AttestationPhase::kFailed)
      return {std::move(s), {}};
    auto hs = handshake_step(s.handshake, event, ctx);
    s.handshake = std::move(hs.state);
    return detail::att_fail_silently(std::move(s), "timeout");
  }

  // delegate the authentication leg
  if (event.kind == Event::Kind::kStart ||
      (event.kind == Event::Kind::kMessage &&
       detail::is_auth_kind(event.message.kind)) ||
      (event.kind == Event::Kind::kMessage &&
       event.message.kind == MsgKind::kAbort &&
       s.phase == AttestationPhase::kAwaitAuth)) {
    if (s.phase != AttestationPhase::kAwaitAuth)
      return detail::att_fail_with_abort(std::move(s), "protocol-error");
    auto hs = handshake_step(s.handshake, event, ctx);
    s.handshake = std::move(hs.state);
    std::vector<ProtocolMessage> outgoing = std::move(hs.outgoing);
    if (s.handshake.failed()) {
      s.phase = AttestationPhase::kFailed;
      s.failure_reason = s.handshake.failure_reason;
      return {std::move(s), std::move(outgoing)};
    }
    if (s.handshake.authenticated() && s.role == AttestationRole::kRequester) {
      ProtocolMessage req{s.handshake.thread_id, ++s.handshake.last_sequence,
                          MsgKind::kCredManifestRequest, Json::object()};
      outgoing.push_back(std::move(req));
      s.phase = AttestationPhase::kAwaitManifest;
    }
    return {std::move(s), std::move(outgoing)};
  }

  const ProtocolMessage& msg = event.message;
  if (s.phase == AttestationPhase::kFailed || s.phase == AttestationPhase::kDone)
    return {std::move(s), {}};
  if (msg.thread_id != s.handshake.thread_id)
    return detail::att_fail_with_abort(std::move(s), "protocol-error");
  if (msg.sequence <= s.handshake.last_sequence)
    return detail::att_fail_with_abort(std::move(s), "protocol-error");
  s.handshake.last_sequence = msg.sequence;

  if (msg.kind == MsgKind::kAbort) {
    std::string reason = msg.body.value("reason", "peer-abort");
    return detail::att_fail_silently(std::move(s), "peer-abort(" + reason + ")");
  }

  // the incident guard: nothing past authentication may proceed without a
  // fully mutual handshake
  if (!s.handshake.authenticated())
    return detail::att_fail_with_abort(std::move(s), "not-authenticated");

  switch (msg.kind) {
    case MsgKind::kCredManifestRequest: {
      if (s.role != AttestationRole::kIssuer ||
          s.phase != AttestationPhase::kAwaitAuth || !ctx.manifest)
        return detail::att_fail_with_abort(std::move(s), "protocol-error");
      s.manifest = ctx.manifest;
      ProtocolMessage reply{s.handshake.thread_id, ++s.handshake.last_sequence,
                            MsgKind::kCredManifest,
                            Json{{"manifest", ctx.manifest->to_json()}}};
      s.phase = AttestationPhase::kAwaitApplication;
      return {std::move(s), {std::move(reply)}};
    }

    case MsgKind::kCredManifest: {
      if (s.role != AttestationRole::kRequester ||
          s.phase != AttestationPhase::kAwaitManifest)
        return detail::att_fail_with_abort(std::move(s), "protocol-error");
      try {
        s.manifest = CredentialManifest::from_json(msg.body.at("manifest"));
      } catch (const std::exception&) {
        return detail::att_fail_with_abort(std::move(s), "protocol-error");
      }
      ProtocolMessage application{
          s.handshake.thread_id, ++s.handshake.last_sequence,
          MsgKind::kCredApplication,
          Json{{"manifest_id", s.manifest->manifest_id}}};
      s.phase = AttestationPhase::kAwaitFulfillment;
      return {std::move(s), {std::move(application)}};
    }

    case MsgKind::kCredApplication: {
      if (s.role != AttestationRole::kIssuer ||
          s.phase != AttestationPhase::kAwaitApplication || !s.manifest)
        return detail::att_fail_with_abort(std::move(s), "protocol-error");
      if (msg.body.value("manifest_id", "") != s.manifest->manifest_id)
        return detail::att_fail_with_abort(std::move(s), "protocol-error");
      // gate on the claims the requester presented during the handshake
      Json presented = Json::object();
      for (const auto& [descriptor, claims] : s.handshake.peer_claims)
        for (const auto& [k, v] : claims.items()) presented[k] = v;
      ClaimDecision decision = evaluate_claims(presented, ctx.policy);
      if (!decision.trusted)
        return detail::att_fail_with_abort(std::move(s),
                                           "claims-refused(" + decision.reason + ")");
      if (!s.handshake.peer)
        return detail::att_fail_with_abort(std::move(s), "not-authenticated");
      VerifiableCredential rvc;
      try {
        rvc = issue_credential(ctx.keys, ctx.did, *s.handshake.peer,
                               std::string(kRichType), ctx.rvc_claim_template,
                               ctx.clock->now_iso());
      } catch (const Error& e) {
        // transitions are total: an unissuable credential fails the thread
        return detail::att_fail_with_abort(std::move(s),
                                           "issuance-error(" + e.code() + ")");
      }
      ProtocolMessage fulfillment{
          s.handshake.thread_id, ++s.handshake.last_sequence,
          MsgKind::kCredFulfillment, Json{{"credential", rvc.to_json()}}};
      s.phase = AttestationPhase::kDone;
      return {std::move(s), {std::move(fulfillment)}};
    }

    case MsgKind::kCredFulfillment: {
      if (s.role != AttestationRole::kRequester ||
          s.phase != AttestationPhase::kAwaitFulfillment)
        return detail::att_fail_with_abort(std::move(s), "protocol-error");
      VerifiableCredential rvc;
      try {
        rvc = VerifiableCredential::from_json(msg.body.at("credential"));
      } catch (const std::exception&) {
        return detail::att_fail_silently(std::move(s), "bad-fulfillment");
      }
      if (rvc.subject != ctx.did ||
          !verify_credential(rvc, *ctx.resolver, *ctx.registry))
        return detail::att_fail_silently(std::move(s), "bad-fulfillment");
      try {
        ctx.wallet->add_credential(rvc, *ctx.resolver);
      } catch (const Error&) {
        return detail::att_fail_silently(std::move(s), "bad-fulfillment");
      }
      s.phase = AttestationPhase::kDone;
      return {std::move(s), {}};
    }

    default:
      return detail::att_fail_with_abort(std::move(s), "protocol-error");
  }
}

}  // namespace fabric
