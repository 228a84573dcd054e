#pragma once

// Exhaustive small-model exploration of the handshake + attestation machines
// under an active adversary.
//
// The adversary cannot forge Ed25519 signatures but fully controls the wire:
// it may deliver, drop, or inject messages assembled from everything it has
// observed (replays with adapted thread/sequence headers, re-wrapped
// presentations, forged acknowledgments and issuance messages, bogus
// requests). Exploration walks every interleaving up to a message-event
// depth bound, deduplicating states, and checks at every node that neither
// side reaches AUTHENTICATED - and no CRED_FULFILLMENT exists - unless both
// presentations were genuinely created by their holders for this thread's
// challenges and verified by the respective peers.
//
// State-space economics: messages intern into a global table so nodes hash
// and copy as integer sets; wire knowledge is normalized to (kind, body)
// because injection re-frames thread and sequence anyway; failed or done
// machines are inert, so their detail is collapsed out of the state hash;
// a VerifyMemoScope caches the signature checks that repeat across branches.

#include <map>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "fabric/domain.hpp"

namespace modelcheck {

using namespace fabric;

struct Result {
  std::vector<std::string> violations;
  std::size_t nodes_explored = 0;
  std::size_t transitions = 0;
  std::size_t deepest = 0;
  bool budget_exhausted = false;
  bool requester_completed = false;  // liveness anchor: some trace reaches DONE
};

namespace detail {

inline Json dump_live(const HandshakeState& s) {
  return Json{{"phase", static_cast<int>(s.phase)},
              {"thread", s.thread_id},
              {"seq", s.last_sequence},
              {"issued", s.issued_challenge.nonce},
              {"peer_ch", s.peer_challenge.nonce},
              {"peer", s.peer ? s.peer->str() : ""},
              {"claims", s.peer_claims}};
}

/// Terminal machines are inert; everything beyond the terminal flavor is
/// unreachable detail, and collapsing it merges the post-abort plateau.
inline Json dump(const AttestationState& s) {
  if (s.failed()) return Json("FAILED");
  if (s.done()) return Json("DONE");
  return Json{{"phase", static_cast<int>(s.phase)},
              {"hs", dump_live(s.handshake)},
              {"manifest", s.manifest ? s.manifest->manifest_id : ""}};
}

}  // namespace detail

class Explorer {
 public:
  explicit Explorer(int max_message_events = 12,
                    std::size_t transition_budget = 5'000'000)
      : depth_limit_(max_message_events), budget_(transition_budget) {
    DomainConfig cfg;
    cfg.domain_name = "M";
    cfg.rng_seed = sha256(to_bytes(std::string_view("model-check-domain")));
    ledger_ = std::make_shared<Ledger>();
    domain_ = deploy_domain(cfg, ledger_);
    req_template_ = domain_->attestation_requester_context(0);
    iss_template_ = domain_->attestation_issuer_context();
    adv_challenge_json_ = Challenge{"QURWRVJTQVJZLU5PTkNF", "",
                                    domain_->clock.now_iso(), 0, 120}
                              .to_json();
    pd_basic_json_ = basic_agent_definition().to_json();
    manifest_json_ = domain_->manifest.to_json();
  }

  Result run() {
    VerifyMemoScope crypto_memo;

    Node root;
    root.req.role = AttestationRole::kRequester;
    root.req.handshake.role = Role::kInitiator;
    root.iss.role = AttestationRole::kIssuer;
    root.iss.handshake.role = Role::kResponder;
    root.req_wallet = std::make_shared<Wallet>(domain_->worker(0).wallet);
    root.iss_wallet = std::make_shared<Wallet>(domain_->identity_issuer.wallet);
    root.req_rng = *domain_->worker(0).rng;
    root.iss_rng = *domain_->identity_issuer.rng;

    // the initiator's start event is the root transition
    apply_machine_event(root, 0, Event::start());
    check_invariants(root);

    std::vector<Node> stack{std::move(root)};
    while (!stack.empty()) {
      if (result_.transitions >= budget_) {
        result_.budget_exhausted = true;
        break;
      }
      Node node = std::move(stack.back());
      stack.pop_back();

      std::string key = hash_of(node);
      auto [it, fresh] = visited_.try_emplace(key, node.depth);
      if (!fresh) {
        if (it->second <= node.depth) continue;
        it->second = node.depth;  // revisit: shallower, so more budget left
      }
      ++result_.nodes_explored;
      result_.deepest = std::max(result_.deepest, node.depth);
      if (node.req.done()) result_.requester_completed = true;

      bool req_terminal = node.req.done() || node.req.failed();
      bool iss_terminal = node.iss.done() || node.iss.failed();
      if (req_terminal && iss_terminal && node.pending.empty()) continue;
      if (node.depth >= static_cast<std::size_t>(depth_limit_)) continue;

      // deliveries and drops of in-flight messages; delivering to an inert
      // machine equals dropping, so only the drop variant is kept there
      for (std::size_t i = 0; i < node.pending.size(); ++i) {
        auto [target, msg_id] = node.pending[i];
        bool target_terminal = target == 0 ? req_terminal : iss_terminal;
        if (!target_terminal) {
          Node next = node;
          next.pending.erase(next.pending.begin() + i);
          ++next.depth;
          deliver(next, target, message(msg_id));
          stack.push_back(std::move(next));
        }
        Node dropped = node;
        dropped.pending.erase(dropped.pending.begin() + i);  // drop is free
        stack.push_back(std::move(dropped));
      }

      // adversarial injections
      for (int target = 0; target < 2; ++target) {
        if (target == 0 && req_terminal) continue;
        if (target == 1 && iss_terminal) continue;
        for (int candidate : candidates(node, target)) {
          Node next = node;
          ++next.depth;
          deliver(next, target, message(candidate));
          stack.push_back(std::move(next));
        }
      }
    }
    return result_;
  }

 private:
  struct Node {
    AttestationState req, iss;
    std::shared_ptr<Wallet> req_wallet, iss_wallet;  // cloned before mutation
    ChallengeStore req_ch, iss_ch;
    DeterministicRng req_rng{Bytes(32, 0)}, iss_rng{Bytes(32, 0)};
    std::vector<std::pair<int, int>> pending;  // (target, msg id); 0 = to req
    std::set<int> knowledge;                   // normalized msg ids
    bool a_verified_b = false;  // requester accepted the issuer's VP
    bool b_verified_a = false;  // issuer accepted the requester's VP
    bool fulfillment_seen = false;
    std::size_t depth = 0;
  };

  // ---- message interning -------------------------------------------------

  int intern(const ProtocolMessage& m) {
    std::string key = canonicalize_str(m.to_json());
    auto [it, fresh] = intern_index_.try_emplace(key, (int)messages_.size());
    if (fresh) messages_.push_back(m);
    return it->second;
  }

  const ProtocolMessage& message(int id) const { return messages_[id]; }

  /// Wire knowledge keeps only what injection can use: kind and body, with
  /// abort reasons blanked (receivers collapse them anyway).
  int normalized_knowledge_id(const ProtocolMessage& m) {
    ProtocolMessage norm{"", 0, m.kind, m.body};
    if (m.kind == MsgKind::kAbort) norm.body = Json{{"reason", "x"}};
    return intern(norm);
  }

  // ---- stepping ----------------------------------------------------------

  PartyContext context_for(Node& n, int side) {
    PartyContext ctx = side == 0 ? req_template_ : iss_template_;
    Wallet* wallet = side == 0 ? n.req_wallet.get() : n.iss_wallet.get();
    ctx.wallet = wallet;
    ctx.registry = &wallet->registry();
    ctx.challenges = side == 0 ? &n.req_ch : &n.iss_ch;
    ctx.rng = side == 0 ? &n.req_rng : &n.iss_rng;
    return ctx;
  }

  /// Steps one machine, records emissions as wire knowledge and genuine-VP
  /// ground truth, applies acceptance bookkeeping.
  void apply_machine_event(Node& n, int side, const Event& event) {
    ++result_.transitions;
    // the only wallet-mutating edge is a fulfillment delivery to the
    // requester; clone so sibling branches keep their snapshot
    if (side == 0 && event.kind == Event::Kind::kMessage &&
        event.message.kind == MsgKind::kCredFulfillment)
      n.req_wallet = std::make_shared<Wallet>(*n.req_wallet);

    PartyContext ctx = context_for(n, side);
    AttestationState& machine = side == 0 ? n.req : n.iss;
    AttestationState before = machine;
    auto stepped = attestation_step(machine, event, ctx);
    machine = stepped.state;

    if (event.kind == Event::Kind::kMessage)
      note_acceptance(n, side, before, event.message);

    for (const ProtocolMessage& out : stepped.outgoing) {
      if ((out.kind == MsgKind::kAuthResponse ||
           out.kind == MsgKind::kAuthComplete) &&
          out.body.contains("vp")) {
        const Json& vp = out.body["vp"];
        genuine_vps_[to_hex(sha256(canonicalize(vp)))] = {
            vp.value("holder", ""), vp["proof"].value("challenge", "")};
      }
      int id = intern(out);
      n.knowledge.insert(normalized_knowledge_id(out));
      n.pending.emplace_back(side == 0 ? 1 : 0, id);
      if (out.kind == MsgKind::kCredFulfillment) n.fulfillment_seen = true;
    }
  }

  void deliver(Node& n, int target, const ProtocolMessage& msg) {
    apply_machine_event(n, target, Event::incoming(msg));
    check_invariants(n);
  }

  /// A phase progression across a VP-verifying edge means the machine's
  /// verify_presentation accepted the delivered presentation. Ground-truth
  /// check: that presentation must be a genuine emission by the expected
  /// peer, bound to the challenge this side issued in this thread.
  void note_acceptance(Node& n, int side, const AttestationState& before,
                       const ProtocolMessage& msg) {
    const AttestationState& after = side == 0 ? n.req : n.iss;
    bool requester_accepted =
        side == 0 &&
        before.handshake.phase == HandshakePhase::kAwaitResponse &&
        after.handshake.phase == HandshakePhase::kAwaitAck;
    bool issuer_accepted =
        side == 1 &&
        before.handshake.phase == HandshakePhase::kAwaitComplete &&
        after.handshake.phase == HandshakePhase::kAuthenticated;
    if (!requester_accepted && !issuer_accepted) return;

    if (!msg.body.contains("vp")) {
      violation(n, "machine progressed across a VP edge without a VP");
      return;
    }
    auto it = genuine_vps_.find(to_hex(sha256(canonicalize(msg.body["vp"]))));
    if (it == genuine_vps_.end()) {
      violation(n, "accepted presentation was never emitted by an honest agent");
      return;
    }
    const auto& [holder, challenge] = it->second;
    std::string expected_holder = side == 0
                                      ? domain_->identity_issuer.did.str()
                                      : domain_->worker(0).did.str();
    if (holder != expected_holder) {
      violation(n, "accepted presentation held by " + holder + ", expected " +
                       expected_holder);
      return;
    }
    if (challenge != before.handshake.issued_challenge.nonce) {
      violation(n, "accepted presentation bound to a foreign challenge");
      return;
    }
    (side == 0 ? n.a_verified_b : n.b_verified_a) = true;
  }

  void check_invariants(const Node& n) {
    bool both = n.a_verified_b && n.b_verified_a;
    if (n.req.handshake.authenticated() && !both)
      violation(n, "requester AUTHENTICATED without both presentations verified");
    if (n.iss.handshake.authenticated() && !both)
      violation(n, "issuer AUTHENTICATED without both presentations verified");
    if (n.fulfillment_seen && !(both && n.iss.handshake.authenticated()))
      violation(n, "CRED_FULFILLMENT emitted without mutual authentication");
    if (n.req.done() && n.req.role == AttestationRole::kRequester && !both)
      violation(n, "requester DONE without mutual authentication");
  }

  void violation(const Node& n, const std::string& what) {
    if (result_.violations.size() < 16)
      result_.violations.push_back(what + " (depth " + std::to_string(n.depth) +
                                   ")");
  }

  // ---- adversary ---------------------------------------------------------

  std::vector<int> candidates(const Node& n, int target) {
    const AttestationState& machine = target == 0 ? n.req : n.iss;
    std::string thread = machine.handshake.thread_id.empty()
                             ? "adversary-thread"
                             : machine.handshake.thread_id;
    std::uint64_t seq = machine.handshake.last_sequence + 1;

    std::vector<int> out;
    std::set<int> seen;
    auto add = [&](MsgKind kind, Json body) {
      int id = intern(ProtocolMessage{thread, seq, kind, std::move(body)});
      if (seen.insert(id).second) out.push_back(id);
    };

    // adapted replays of everything observed on the wire
    // (messages are copied out: add() may grow the backing intern table)
    for (int k : n.knowledge) {
      ProtocolMessage m = message(k);
      add(m.kind, m.body);
    }

    // observed presentations re-wrapped in fresh frames
    for (int k : n.knowledge) {
      ProtocolMessage m = message(k);
      if (!m.body.contains("vp")) continue;
      add(MsgKind::kAuthResponse,
          Json{{"vp", m.body["vp"]},
               {"challenge", adv_challenge_json_},
               {"presentation_definition", pd_basic_json_}});
      add(MsgKind::kAuthComplete, Json{{"vp", m.body["vp"]}});
    }

    // forged acknowledgments (no signature / garbage signature)
    add(MsgKind::kAuthAck, Json{{"status", "ok"}});
    add(MsgKind::kAuthAck,
        Json{{"status", "ok"}, {"ack_jws", "eyJhbGciOiJFZERTQSJ9..AAAA"}});

    // an adversary-initiated handshake
    const Did& other =
        target == 0 ? domain_->identity_issuer.did : domain_->worker(0).did;
    add(MsgKind::kAuthRequest,
        Json{{"did", other.str()},
             {"challenge", adv_challenge_json_},
             {"presentation_definition", pd_basic_json_}});

    // issuance-stage forgeries (the downgrade incident and friends)
    add(MsgKind::kCredManifestRequest, Json::object());
    add(MsgKind::kCredApplication,
        Json{{"manifest_id", domain_->manifest.manifest_id}});
    add(MsgKind::kCredApplication, Json{{"manifest_id", "bogus"}});
    add(MsgKind::kCredManifest, Json{{"manifest", manifest_json_}});
    for (int k : n.knowledge) {
      ProtocolMessage m = message(k);
      if (m.kind == MsgKind::kCredFulfillment && m.body.contains("credential"))
        add(MsgKind::kCredFulfillment, Json{{"credential", m.body["credential"]}});
    }
    add(MsgKind::kCredFulfillment, Json{{"credential", Json{{"bogus", true}}}});

    add(MsgKind::kAbort, Json{{"reason", "injected"}});
    return out;
  }

  // ---- hashing -----------------------------------------------------------

  std::string hash_of(const Node& n) {
    std::vector<std::pair<int, int>> pending = n.pending;
    std::sort(pending.begin(), pending.end());
    Json pending_json = Json::array();
    for (const auto& [t, id] : pending)
      pending_json.push_back(Json::array({t, id}));

    bool req_terminal = n.req.done() || n.req.failed();
    bool iss_terminal = n.iss.done() || n.iss.failed();
    Json state{{"req", detail::dump(n.req)},
               {"iss", detail::dump(n.iss)},
               {"req_creds",
                req_terminal ? 0 : n.req_wallet->credentials().size()},
               {"req_ch", req_terminal ? Json() : n.req_ch.snapshot()},
               {"iss_ch", iss_terminal ? Json() : n.iss_ch.snapshot()},
               {"req_rng", req_terminal ? 0 : n.req_rng.counter()},
               {"iss_rng", iss_terminal ? 0 : n.iss_rng.counter()},
               {"flags", Json::array({n.a_verified_b, n.b_verified_a,
                                      n.fulfillment_seen})},
               {"pending", pending_json},
               {"knowledge", n.knowledge}};
    return to_hex(sha256(canonicalize(state)));
  }

  int depth_limit_;
  std::size_t budget_;
  std::shared_ptr<Ledger> ledger_;
  std::unique_ptr<Domain> domain_;
  PartyContext req_template_, iss_template_;
  Json adv_challenge_json_, pd_basic_json_, manifest_json_;

  std::vector<ProtocolMessage> messages_;
  std::unordered_map<std::string, int> intern_index_;
  std::map<std::string, std::pair<std::string, std::string>> genuine_vps_;
  std::unordered_map<std::string, std::size_t> visited_;
  Result result_;
};

inline Result explore(int max_message_events = 12,
                      std::size_t budget = 5'000'000) {
  return Explorer(max_message_events, budget).run();
}

}  // namespace modelcheck
