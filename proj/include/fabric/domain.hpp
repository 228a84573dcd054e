#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "fabric/ledger.hpp"
#include "fabric/session.hpp"
#include "fabric/wallet.hpp"

namespace fabric {

struct DomainConfig {
  std::string domain_name;
  Bytes rng_seed;  // 32 octets; all agent seeds derive from it
  int worker_count = 1;
  Json issuer_rvc_claims = Json{{"role", "travel-booking"},
                                {"capabilities", Json::array({"quote", "book"})}};
  std::vector<std::string> cross_domain_trusted_issuers;
  std::string transport_binding = "inproc";  // inproc | http
  int http_port = 0;                         // 0 = ephemeral

  void validate() const {
    if (domain_name.empty()) throw Error("bad-config", "domain_name required");
    if (rng_seed.size() != kSeedSize)
      throw Error("bad-config", "rng_seed must be 32 octets");
    if (worker_count < 1) throw Error("bad-config", "worker_count must be >= 1");
    if (transport_binding != "inproc" && transport_binding != "http")
      throw Error("bad-config", "transport_binding must be inproc or http");
    if (!issuer_rvc_claims.is_object() ||
        !claim_shape_violation(kRichType, issuer_rvc_claims).empty())
      throw Error("bad-config", "issuer_rvc_claims must satisfy the rich shape");
  }

  Json to_json() const {
    return Json{{"domain_name", domain_name},
                {"rng_seed", to_hex(rng_seed)},
                {"worker_count", worker_count},
                {"issuer_rvc_claims", issuer_rvc_claims},
                {"cross_domain_trusted_issuers", cross_domain_trusted_issuers},
                {"transport_binding", transport_binding},
                {"http_port", http_port}};
  }

  static DomainConfig from_json(const Json& j) {
    DomainConfig cfg;
    cfg.domain_name = j.at("domain_name").get<std::string>();
    cfg.rng_seed = from_hex(j.at("rng_seed").get<std::string>());
    cfg.worker_count = j.value("worker_count", 1);
    if (j.contains("issuer_rvc_claims")) cfg.issuer_rvc_claims = j["issuer_rvc_claims"];
    cfg.cross_domain_trusted_issuers =
        j.value("cross_domain_trusted_issuers", std::vector<std::string>{});
    cfg.transport_binding = j.value("transport_binding", "inproc");
    cfg.http_port = j.value("http_port", 0);
    cfg.validate();
    return cfg;
  }
};

struct AgentHandle {
  enum class Role { kOrchestrator, kIdentityIssuer, kWorker };
  Did did;
  Role role = Role::kWorker;
  Wallet wallet;
  std::string inbox;  // logical intra-domain address
  std::unique_ptr<Resolver> resolver;
  std::shared_ptr<ChallengeStore> challenges;
  std::shared_ptr<DeterministicRng> rng;
};

inline const PresentationDefinition& basic_agent_definition() {
  static const PresentationDefinition pd{
      "pd-basic-agent",
      {{"basic-agent", std::string(kBasicType), {"agent"}, {}}}};
  return pd;
}

inline const PresentationDefinition& rich_agent_definition() {
  static const PresentationDefinition pd{
      "pd-rich-agent",
      {{"rich-agent", std::string(kRichType), {"role"}, {}}}};
  return pd;
}

/// A deployed security domain: orchestrator (off-ledger DID), one identity
/// issuer and N workers (ledger-anchored DIDs), provisioned wallets and
/// registries, plus the per-role presentation definitions and claim policies
/// the deterministic protocol runs on.
class Domain {
 public:
  DomainConfig config;
  std::shared_ptr<LedgerPort> ledger;
  std::shared_ptr<ResolverStats> resolver_stats = std::make_shared<ResolverStats>();
  LogicalClock clock;

  AgentHandle orchestrator;
  AgentHandle identity_issuer;
  std::vector<AgentHandle> workers;
  DidDocument orchestrator_document;
  TrustRegistry cross_registry;  // scope "cross": foreign identity issuers
  CredentialManifest manifest;
  ClaimPolicy issuer_policy;  // gates issuance on presented bVC claims
  ClaimPolicy worker_policy;  // evaluates issuer/peer rVC claims
  ClaimPolicy cross_policy;   // evaluates foreign rVC claims

  AgentHandle& worker(std::size_t index) { return workers.at(index); }

  void trust_foreign_issuer(const Did& issuer_did, std::string label = {}) {
    cross_registry.trusted_issuers[issuer_did.str()] =
        TrustRegistry::Entry{{std::string(kRichType)}, std::move(label)};
  }

  /// Context for the worker side of the intra-domain attestation.
  PartyContext attestation_requester_context(std::size_t worker_index) {
    AgentHandle& w = worker(worker_index);
    return make_context(w, rich_agent_definition(), worker_policy,
                        &w.wallet.registry());
  }

  /// Context for the identity issuer answering attestation requests.
  PartyContext attestation_issuer_context() {
    PartyContext ctx =
        make_context(identity_issuer, basic_agent_definition(), issuer_policy,
                     &identity_issuer.wallet.registry());
    ctx.manifest = manifest;
    ctx.rvc_claim_template = config.issuer_rvc_claims;
    return ctx;
  }

  /// Context for either side of an inter-domain authentication; trust comes
  /// from the cross-scope registry.
  PartyContext cross_auth_context(std::size_t worker_index) {
    AgentHandle& w = worker(worker_index);
    return make_context(w, rich_agent_definition(), cross_policy,
                        &cross_registry);
  }

  Json provisioning_manifest() const {
    Json worker_dids = Json::array();
    for (const auto& w : workers) worker_dids.push_back(w.did.str());
    return Json{{"domain", config.domain_name},
                {"orchestrator", orchestrator.did.str()},
                {"identity_issuer", identity_issuer.did.str()},
                {"workers", worker_dids},
                {"transport_binding", config.transport_binding}};
  }

 private:
  PartyContext make_context(AgentHandle& agent,
                            const PresentationDefinition& peer_definition,
                            const ClaimPolicy& policy,
                            const TrustRegistry* registry) {
    PartyContext ctx;
    ctx.did = agent.did;
    ctx.keys = agent.wallet.keypair();
    ctx.wallet = &agent.wallet;
    ctx.resolver = agent.resolver.get();
    ctx.registry = registry;
    ctx.peer_definition = peer_definition;
    ctx.policy = policy;
    ctx.challenges = agent.challenges.get();
    ctx.clock = &clock;
    ctx.rng = agent.rng.get();
    return ctx;
  }
};

namespace detail {

inline AgentHandle make_agent(const DomainConfig& cfg, AgentHandle::Role role,
                              const std::string& label, const Did& did,
                              const KeyPair& keys,
                              const std::filesystem::path& wallet_root) {
  AgentHandle agent;
  agent.did = did;
  agent.role = role;
  agent.inbox = "inproc://" + cfg.domain_name + "/" + label;
  std::filesystem::path root;
  if (!wallet_root.empty()) root = wallet_root / cfg.domain_name / label;
  agent.wallet = Wallet(did, keys, root);
  agent.challenges = std::make_shared<ChallengeStore>();
  agent.rng = std::make_shared<DeterministicRng>(
      derive_seed(cfg.rng_seed, label + "/session"));
  return agent;
}

}  // namespace detail

/// Deployment (the fabric's step 1): creates and anchors all agent
/// identities, provisions bVCs, the issuer's own rVC, trusted documents and
/// registries. Deterministic in rng_seed; timestamps come from the domain's
/// logical clock.
inline std::unique_ptr<Domain> deploy_domain(
    const DomainConfig& config, std::shared_ptr<LedgerPort> ledger,
    const std::filesystem::path& wallet_root = {}) {
  config.validate();
  if (!ledger) throw Error("ledger-unavailable", "no ledger for deployment");

  auto domain = std::make_unique<Domain>();
  domain->config = config;
  domain->ledger = ledger;

  // orchestrator, off-ledger
  KeyPair orch_keys =
      generate_keypair(derive_seed(config.rng_seed, "orchestrator"));
  auto [orch_did, orch_doc] = new_org_document(orch_keys);
  domain->orchestrator = detail::make_agent(
      config, AgentHandle::Role::kOrchestrator, "orchestrator", orch_did,
      orch_keys, wallet_root);
  domain->orchestrator_document = orch_doc;

  // identity issuer and workers, ledger-anchored
  KeyPair issuer_keys =
      generate_keypair(derive_seed(config.rng_seed, "identity-issuer"));
  auto [issuer_did, issuer_doc] = new_self_certified_document(
      issuer_keys, {{"inbox", "AgentEndpoint",
                     "inproc://" + config.domain_name + "/identity-issuer"}});
  domain->identity_issuer =
      detail::make_agent(config, AgentHandle::Role::kIdentityIssuer,
                         "identity-issuer", issuer_did, issuer_keys, wallet_root);
  ledger->register_did(issuer_doc, sign_document(issuer_doc, issuer_keys));
  domain->clock.advance();

  std::vector<std::pair<Did, KeyPair>> worker_ids;
  for (int i = 0; i < config.worker_count; ++i) {
    std::string label = "worker-" + std::to_string(i);
    KeyPair keys = generate_keypair(derive_seed(config.rng_seed, label));
    auto [did, doc] = new_self_certified_document(
        keys, {{"inbox", "AgentEndpoint",
                "inproc://" + config.domain_name + "/" + label}});
    domain->workers.push_back(detail::make_agent(
        config, AgentHandle::Role::kWorker, label, did, keys, wallet_root));
    ledger->register_did(doc, sign_document(doc, keys));
    domain->clock.advance();
    worker_ids.emplace_back(did, keys);
  }

  // trust material: the orchestrator document travels via provisioning, the
  // intra registry recognizes the orchestrator (bVCs, plus the issuer's own
  // deployment rVC) and the identity issuer (rVCs)
  TrustRegistry intra;
  intra.scope = "intra";
  intra.trusted_issuers[orch_did.str()] =
      {{std::string(kBasicType), std::string(kRichType)}, "orchestrator"};
  intra.trusted_issuers[issuer_did.str()] =
      {{std::string(kRichType)}, "identity-issuer"};

  domain->cross_registry.scope = "cross";
  for (const auto& did_str : config.cross_domain_trusted_issuers)
    domain->cross_registry.trusted_issuers[did_str] =
        {{std::string(kRichType)}, "foreign-issuer"};

  auto provision = [&](AgentHandle& agent) {
    if (!agent.wallet.root_path().empty()) agent.wallet.save();
    agent.wallet.trust_document(orch_doc);
    agent.wallet.set_registry(intra);
    agent.resolver = std::make_unique<Resolver>(
        std::map<std::string, DidDocument>{{orch_did.str(), orch_doc}}, ledger,
        0, &domain->clock, domain->resolver_stats);
  };
  provision(domain->orchestrator);
  provision(domain->identity_issuer);
  for (auto& w : domain->workers) provision(w);

  // credentials at deployment: every worker gets its bVC, the issuing agent
  // its own rVC
  for (auto& w : domain->workers) {
    VerifiableCredential bvc =
        issue_credential(orch_keys, orch_did, w.did, std::string(kBasicType),
                         Json{{"agent", true}}, domain->clock.now_iso());
    w.wallet.store_credential(bvc);
    domain->clock.advance();
  }
  VerifiableCredential issuer_rvc = issue_credential(
      orch_keys, orch_did, issuer_did, std::string(kRichType),
      Json{{"role", "identity-issuer"},
           {"authorizations", Json::array({"attest-agents"})}},
      domain->clock.now_iso());
  domain->identity_issuer.wallet.store_credential(issuer_rvc);
  domain->clock.advance();

  domain->manifest.manifest_id = "urn:agentsim:manifest:" + config.domain_name;
  domain->manifest.issuer = issuer_did;
  domain->manifest.output_descriptors.push_back(
      {std::string(kRichType), config.issuer_rvc_claims});
  domain->manifest.presentation_definition = basic_agent_definition();

  domain->issuer_policy.required_fields = {"agent"};
  domain->worker_policy.required_fields = {"role"};
  domain->cross_policy.required_fields = {"role"};

  return domain;
}

/// Serving rig for one protocol session: in-process bus or per-agent HTTP
/// listeners, one transport for every send.
class SessionRig {
 public:
  explicit SessionRig(const std::string& binding) : binding_(binding) {
    if (binding == "inproc") {
      bus_ = std::make_unique<InProcessBus>();
    } else if (binding == "http") {
      http_ = std::make_unique<HttpTransport>();
    } else {
      throw Error("bad-config", "unknown transport binding " + binding);
    }
  }

  Transport& transport() {
    if (bus_) return *bus_;
    return *http_;
  }

  const std::string& binding() const { return binding_; }

  /// Serves the peer and returns the address other agents send to.
  std::string serve(AgentPeer& peer, const std::string& logical_name,
                    AgentCard card, int port = 0) {
    if (bus_) {
      bus_->serve(logical_name, peer.dispatcher());
      card.endpoint = logical_name;
      bus_->serve_card(logical_name, card);
      return logical_name;
    }
    servers_.push_back(
        std::make_unique<HttpAgentServer>(peer.dispatcher(), card, port));
    return servers_.back()->endpoint();
  }

 private:
  std::string binding_;
  std::unique_ptr<InProcessBus> bus_;
  std::unique_ptr<HttpTransport> http_;
  std::vector<std::unique_ptr<HttpAgentServer>> servers_;
};

struct AttestationRunResult {
  bool done = false;
  std::string failure_reason;
  AttestationState requester;
  AttestationState issuer;
  Json requester_trace;
  Json issuer_trace;
};

/// Intra-domain mutual authentication + attestation (steps 2 and 3) between
/// a worker and the domain's identity issuer. `via` reroutes sends through a
/// wrapper transport (fault injection) while serving stays on the rig.
inline AttestationRunResult run_attestation(Domain& domain,
                                            std::size_t worker_index,
                                            SessionRig& rig,
                                            Transport* via = nullptr,
                                            int timeout_ms = 5000) {
  AgentPeer requester("requester",
                      domain.attestation_requester_context(worker_index));
  AgentPeer issuer("issuer", domain.attestation_issuer_context());
  requester.host_attestation(AttestationRole::kRequester);
  issuer.host_attestation(AttestationRole::kIssuer);

  AgentHandle& w = domain.worker(worker_index);
  std::string issuer_addr = rig.serve(
      issuer, domain.identity_issuer.inbox,
      AgentCard{"identity-issuer", domain.identity_issuer.did, ""});
  std::string worker_addr =
      rig.serve(requester, w.inbox, AgentCard{"worker", w.did, ""});
  Transport& wire = via ? *via : rig.transport();
  requester.bind(&wire, issuer_addr);
  issuer.bind(&wire, worker_addr);

  requester.start();
  wait_for_completion({&requester, &issuer}, timeout_ms);

  AttestationRunResult out;
  out.requester = requester.attestation_state();
  out.issuer = issuer.attestation_state();
  out.done = out.requester.done() && out.issuer.done();
  out.failure_reason = out.requester.failed() ? requester.failure_reason()
                       : out.issuer.failed() ? issuer.failure_reason()
                                             : "";
  out.requester_trace = requester.trace();
  out.issuer_trace = issuer.trace();
  return out;
}

}  // namespace fabric
