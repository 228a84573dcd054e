#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "fabric/domain.hpp"
#include "fabric/ledger_http.hpp"

namespace fabric {

inline const std::set<std::string>& scenario_names() {
  static const std::set<std::string> names{
      "intra-attest-A",
      "intra-attest-B",
      "cross-auth",
      "full",
      "adversarial-tamper",
      "adversarial-replay",
      "adversarial-untrusted-issuer",
      "adversarial-downgrade",
      "adversarial-rotate-mid-session"};
  return names;
}

struct Scenario {
  std::string name;
  int runs = 1;
  Bytes seed;  // 32 octets
  std::string transport = "inproc";  // inproc | http

  void validate() const {
    if (!scenario_names().contains(name))
      throw Error("scenario-setup", "unknown scenario " + name);
    if (runs < 1) throw Error("scenario-setup", "runs must be >= 1");
    if (seed.size() != kSeedSize)
      throw Error("scenario-setup", "seed must be 32 octets");
    if (transport != "inproc" && transport != "http")
      throw Error("scenario-setup", "transport must be inproc or http");
  }

  bool adversarial() const { return name.starts_with("adversarial-"); }
};

struct RunRecord {
  int run = 0;
  bool completed = false;
  std::string failure_reason;
  double wall_time_ms = 0;
  std::uint64_t message_count = 0;
  std::uint64_t bytes_on_wire = 0;
  std::uint64_t ledger_reads = 0;
  double wire_latency_mean_ms = 0;
  double wire_latency_max_ms = 0;
  bool defended = false;  // adversarial runs: the fault was contained

  Json to_json() const {
    return Json{{"run", run},
                {"completed", completed},
                {"failure_reason", failure_reason},
                {"wall_time_ms", wall_time_ms},
                {"message_count", message_count},
                {"bytes_on_wire", bytes_on_wire},
                {"ledger_reads", ledger_reads},
                {"wire_latency_mean_ms", wire_latency_mean_ms},
                {"wire_latency_max_ms", wire_latency_max_ms},
                {"defended", defended}};
  }
};

struct RunReport {
  std::string scenario;
  int runs = 0;
  std::string seed_hex;
  std::string transport;
  std::vector<RunRecord> records;

  double completion_rate = 0;
  double mean_time_ms = 0;
  double time_variance = 0;
  double mean_messages = 0;
  double mean_bytes = 0;
  double defense_rate = -1;  // -1: not an adversarial scenario
  std::string expected_failure_reason;

  void aggregate() {
    runs = static_cast<int>(records.size());
    if (records.empty()) return;
    int completed = 0, defended = 0;
    double time_sum = 0, msg_sum = 0, byte_sum = 0;
    for (const auto& r : records) {
      completed += r.completed ? 1 : 0;
      defended += r.defended ? 1 : 0;
      time_sum += r.wall_time_ms;
      msg_sum += static_cast<double>(r.message_count);
      byte_sum += static_cast<double>(r.bytes_on_wire);
    }
    completion_rate = static_cast<double>(completed) / records.size();
    mean_time_ms = time_sum / records.size();
    mean_messages = msg_sum / records.size();
    mean_bytes = byte_sum / records.size();
    double var = 0;
    for (const auto& r : records) {
      double d = r.wall_time_ms - mean_time_ms;
      var += d * d;
    }
    time_variance = var / records.size();
    if (defense_rate >= 0 || !expected_failure_reason.empty())
      defense_rate = static_cast<double>(defended) / records.size();
  }

  Json to_json() const {
    Json recs = Json::array();
    for (const auto& r : records) recs.push_back(r.to_json());
    Json aggregates{{"completion_rate", completion_rate},
                    {"mean_time_ms", mean_time_ms},
                    {"time_variance", time_variance},
                    {"mean_messages", mean_messages},
                    {"mean_bytes", mean_bytes}};
    if (defense_rate >= 0) {
      aggregates["defense_rate"] = defense_rate;
      aggregates["expected_failure_reason"] = expected_failure_reason;
    }
    return Json{{"schema", "fabric-run-report/1"},
                {"scenario", scenario},
                {"runs", runs},
                {"seed", seed_hex},
                {"transport", transport},
                {"note",
                 "protocol messages, bytes, and ledger reads are the "
                 "deterministic analogues of model-dependent call/token counts"},
                {"records", recs},
                {"aggregates", aggregates}};
  }
};

/// Published shape of the report file; validate_run_report enforces it.
inline const Json& run_report_schema() {
  static const Json schema{
      {"$id", "fabric-run-report/1"},
      {"type", "object"},
      {"required", Json::array({"schema", "scenario", "runs", "seed", "transport",
                                "records", "aggregates"})},
      {"properties",
       Json{{"schema", Json{{"const", "fabric-run-report/1"}}},
            {"scenario", Json{{"type", "string"}}},
            {"runs", Json{{"type", "integer"}, {"minimum", 1}}},
            {"seed", Json{{"type", "string"}}},
            {"transport", Json{{"enum", Json::array({"inproc", "http"})}}},
            {"records",
             Json{{"type", "array"},
                  {"items",
                   Json{{"type", "object"},
                        {"required",
                         Json::array({"run", "completed", "failure_reason",
                                      "wall_time_ms", "message_count",
                                      "bytes_on_wire", "ledger_reads"})}}}}},
            {"aggregates",
             Json{{"type", "object"},
                  {"required",
                   Json::array({"completion_rate", "mean_time_ms",
                                "time_variance", "mean_messages",
                                "mean_bytes"})}}}}}};
  return schema;
}

/// Structural validation against run_report_schema plus the defining
/// invariant completion_rate = completed / runs. Returns problems found.
inline std::vector<std::string> validate_run_report(const Json& report) {
  std::vector<std::string> problems;
  auto require = [&](bool cond, const std::string& what) {
    if (!cond) problems.push_back(what);
  };
  require(report.is_object(), "report must be an object");
  if (!report.is_object()) return problems;
  for (const auto& key : run_report_schema()["required"])
    require(report.contains(key.get<std::string>()),
            "missing field " + key.get<std::string>());
  if (!problems.empty()) return problems;
  require(report["schema"] == "fabric-run-report/1", "unknown schema tag");
  require(report["scenario"].is_string(), "scenario must be a string");
  require(report["runs"].is_number_integer() && report["runs"].get<int>() >= 1,
          "runs must be a positive integer");
  require(report["records"].is_array(), "records must be an array");
  require(report["records"].size() == report["runs"].get<std::size_t>(),
          "records count must equal runs");
  int completed = 0;
  for (const auto& r : report["records"]) {
    for (const char* field :
         {"run", "completed", "failure_reason", "wall_time_ms", "message_count",
          "bytes_on_wire", "ledger_reads"})
      require(r.contains(field), std::string("record missing ") + field);
    if (r.value("completed", false)) ++completed;
  }
  const Json& agg = report["aggregates"];
  for (const char* field : {"completion_rate", "mean_time_ms", "time_variance",
                            "mean_messages", "mean_bytes"})
    require(agg.contains(field), std::string("aggregates missing ") + field);
  if (agg.contains("completion_rate") && report["runs"].get<int>() > 0)
    require(std::abs(agg["completion_rate"].get<double>() -
                     static_cast<double>(completed) /
                         report["runs"].get<double>()) < 1e-12,
            "completion_rate does not match records");
  return problems;
}

/// Structural diff of two reports' aggregates. Reports of different
/// scenarios do not compare.
inline Json compare_reports(const Json& a, const Json& b) {
  if (!validate_run_report(a).empty() || !validate_run_report(b).empty())
    throw Error("schema-mismatch", "report fails schema validation");
  if (a["scenario"] != b["scenario"])
    throw Error("schema-mismatch", "reports describe different scenarios");
  Json differences = Json::array();
  std::set<std::string> keys;
  for (const auto& [k, v] : a["aggregates"].items()) keys.insert(k);
  for (const auto& [k, v] : b["aggregates"].items()) keys.insert(k);
  for (const auto& k : keys) {
    Json va = a["aggregates"].value(k, Json());
    Json vb = b["aggregates"].value(k, Json());
    if (va != vb) differences.push_back(Json{{"field", k}, {"a", va}, {"b", vb}});
  }
  return Json{{"identical", differences.empty()}, {"differences", differences}};
}

/// Transport wrapper for fault injection: the filter may mutate, drop
/// (nullopt), or synchronously inject additional traffic via its reference
/// to the inner transport.
class MiddleboxTransport : public Transport {
 public:
  using Filter = std::function<std::optional<Envelope>(const Envelope&,
                                                       const std::string&)>;

  MiddleboxTransport(Transport& inner, Filter filter)
      : inner_(inner), filter_(std::move(filter)) {}

  DeliveryReceipt send(const Envelope& envelope, const std::string& endpoint) override {
    auto filtered = filter_(envelope, endpoint);
    if (!filtered) return DeliveryReceipt{envelope.id, true, 0};  // dropped
    return inner_.send(*filtered, endpoint);
  }

  Transport& inner() { return inner_; }

 private:
  Transport& inner_;
  Filter filter_;
};

namespace detail {

struct RunClock {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - t0)
        .count();
  }
};

inline void fill_wire_metrics(RunRecord& rec, TransportStats& stats) {
  rec.message_count = stats.messages.load();
  rec.bytes_on_wire = stats.bytes.load();
  std::lock_guard lock(stats.latency_mutex);
  if (!stats.latencies_ms.empty()) {
    double sum = std::accumulate(stats.latencies_ms.begin(),
                                 stats.latencies_ms.end(), 0.0);
    rec.wire_latency_mean_ms = sum / stats.latencies_ms.size();
    rec.wire_latency_max_ms =
        *std::max_element(stats.latencies_ms.begin(), stats.latencies_ms.end());
  }
}

inline DomainConfig domain_config(const std::string& name, const Bytes& run_seed,
                                  const std::string& transport) {
  DomainConfig cfg;
  cfg.domain_name = name;
  cfg.rng_seed = derive_seed(run_seed, "domain-" + name);
  cfg.worker_count = 1;
  cfg.transport_binding = transport;
  return cfg;
}

/// Issues the worker's rVC directly (the cross-auth precondition: required
/// rVCs already issued).
inline void provision_worker_rvc(Domain& domain, std::size_t worker_index) {
  AgentHandle& w = domain.worker(worker_index);
  VerifiableCredential rvc = issue_credential(
      domain.identity_issuer.wallet.keypair(), domain.identity_issuer.did,
      w.did, std::string(kRichType), domain.config.issuer_rvc_claims,
      domain.clock.now_iso());
  w.wallet.store_credential(rvc);
  domain.clock.advance();
}

struct CrossAuthSetup {
  std::shared_ptr<Ledger> ledger;
  std::unique_ptr<Domain> domain_a;
  std::unique_ptr<Domain> domain_b;
};

inline CrossAuthSetup cross_auth_setup(const Bytes& run_seed,
                                       const std::string& transport,
                                       bool trust_foreign_issuer = true,
                                       bool provision_rvcs = true) {
  CrossAuthSetup setup;
  setup.ledger = std::make_shared<Ledger>();
  setup.domain_a =
      deploy_domain(domain_config("A", run_seed, transport), setup.ledger);
  setup.domain_b =
      deploy_domain(domain_config("B", run_seed, transport), setup.ledger);
  if (provision_rvcs) {
    provision_worker_rvc(*setup.domain_a, 0);
    provision_worker_rvc(*setup.domain_b, 0);
  }
  if (trust_foreign_issuer) {
    setup.domain_a->trust_foreign_issuer(setup.domain_b->identity_issuer.did,
                                         "domain-B issuer");
  }
  // the responder always recognizes the initiator's issuer; the interesting
  // registry is the initiator's
  setup.domain_b->trust_foreign_issuer(setup.domain_a->identity_issuer.did,
                                       "domain-A issuer");
  return setup;
}

/// Cross-domain mutual authentication: B's worker responds, A's worker
/// initiates. Returns (initiator result, responder peer state).
inline std::pair<CrossAuthResult, HandshakeState> run_cross_auth(
    CrossAuthSetup& setup, SessionRig& rig) {
  AgentPeer responder("responder", setup.domain_b->cross_auth_context(0));
  responder.host_handshake(Role::kResponder);
  std::string responder_addr = rig.serve(
      responder, setup.domain_b->worker(0).inbox,
      AgentCard{"worker-B", setup.domain_b->worker(0).did, ""});

  AgentPeer initiator("initiator", setup.domain_a->cross_auth_context(0));
  std::string initiator_addr = rig.serve(
      initiator, setup.domain_a->worker(0).inbox,
      AgentCard{"worker-A", setup.domain_a->worker(0).did, ""});
  responder.bind(&rig.transport(), initiator_addr);

  CrossAuthResult result =
      cross_domain_auth(initiator, responder_addr, rig.transport());
  wait_for_completion({&responder}, 1000);
  return {result, responder.handshake_state()};
}

inline bool worker_rvc_verifies(Domain& domain, std::size_t worker_index) {
  AgentHandle& w = domain.worker(worker_index);
  auto rvc = w.wallet.find_by_type(kRichType);
  if (!rvc) return false;
  return static_cast<bool>(
      verify_credential(*rvc, *w.resolver, w.wallet.registry()));
}

}  // namespace detail

/// Executes one scenario run; dispatches on the scenario name. Honest
/// scenarios must complete; adversarial ones must contain the injected fault
/// with the expected failure reason.
inline RunRecord execute_run(const Scenario& scenario, int run_index) {
  Bytes run_seed =
      derive_seed(scenario.seed, scenario.name + ":" + std::to_string(run_index));
  RunRecord rec;
  rec.run = run_index;

  auto intra_attest = [&](const std::string& domain_name) {
    auto ledger = std::make_shared<Ledger>();
    auto domain = deploy_domain(
        detail::domain_config(domain_name, run_seed, scenario.transport), ledger);
    SessionRig rig(scenario.transport);
    detail::RunClock t;
    auto result = run_attestation(*domain, 0, rig);
    rec.wall_time_ms = t.elapsed_ms();
    rec.completed = result.done && detail::worker_rvc_verifies(*domain, 0);
    rec.failure_reason = result.failure_reason;
    detail::fill_wire_metrics(rec, rig.transport().stats());
    rec.ledger_reads = domain->resolver_stats->ledger_reads.load();
  };

  if (scenario.name == "intra-attest-A") {
    intra_attest("A");
  } else if (scenario.name == "intra-attest-B") {
    intra_attest("B");
  } else if (scenario.name == "cross-auth") {
    auto setup = detail::cross_auth_setup(run_seed, scenario.transport);
    SessionRig rig(scenario.transport);
    detail::RunClock t;
    auto [result, responder_state] = detail::run_cross_auth(setup, rig);
    rec.wall_time_ms = t.elapsed_ms();
    rec.completed = result.authenticated && responder_state.authenticated() &&
                    result.claims_decision.trusted;
    rec.failure_reason = result.failure_reason;
    detail::fill_wire_metrics(rec, rig.transport().stats());
    rec.ledger_reads = setup.domain_a->resolver_stats->ledger_reads.load() +
                       setup.domain_b->resolver_stats->ledger_reads.load();
  } else if (scenario.name == "full") {
    // the whole fabric workflow: deploy, attest in both domains over the
    // wire, then authenticate across domains with the earned credentials
    auto setup = detail::cross_auth_setup(run_seed, scenario.transport,
                                          /*trust_foreign_issuer=*/true,
                                          /*provision_rvcs=*/false);
    SessionRig rig_a(scenario.transport);
    SessionRig rig_b(scenario.transport);
    SessionRig rig_x(scenario.transport);
    detail::RunClock t;
    auto att_a = run_attestation(*setup.domain_a, 0, rig_a);
    auto att_b = run_attestation(*setup.domain_b, 0, rig_b);
    auto [result, responder_state] = detail::run_cross_auth(setup, rig_x);
    rec.wall_time_ms = t.elapsed_ms();
    rec.completed = att_a.done && att_b.done && result.authenticated &&
                    responder_state.authenticated();
    if (!att_a.done)
      rec.failure_reason = att_a.failure_reason;
    else if (!att_b.done)
      rec.failure_reason = att_b.failure_reason;
    else
      rec.failure_reason = result.failure_reason;
    detail::fill_wire_metrics(rec, rig_a.transport().stats());
    RunRecord rec_b, rec_x;
    detail::fill_wire_metrics(rec_b, rig_b.transport().stats());
    detail::fill_wire_metrics(rec_x, rig_x.transport().stats());
    rec.message_count += rec_b.message_count + rec_x.message_count;
    rec.bytes_on_wire += rec_b.bytes_on_wire + rec_x.bytes_on_wire;
    rec.ledger_reads = setup.domain_a->resolver_stats->ledger_reads.load() +
                       setup.domain_b->resolver_stats->ledger_reads.load();
  } else if (scenario.name == "adversarial-tamper") {
    auto ledger = std::make_shared<Ledger>();
    auto domain = deploy_domain(
        detail::domain_config("A", run_seed, scenario.transport), ledger);
    SessionRig rig(scenario.transport);
    MiddleboxTransport middlebox(
        rig.transport(),
        [](const Envelope& env, const std::string&) -> std::optional<Envelope> {
          if (env.message.kind != MsgKind::kAuthResponse) return env;
          Envelope tampered = env;
          auto& claims =
              tampered.message
                  .body["vp"]["credentials"][0]["credential_subject"]["claims"];
          claims["role"] = claims.value("role", "") + "x";
          return tampered;
        });
    detail::RunClock t;
    auto result = run_attestation(*domain, 0, rig, &middlebox);
    rec.wall_time_ms = t.elapsed_ms();
    rec.completed = false;
    rec.failure_reason = result.failure_reason;
    rec.defended = !result.done && result.failure_reason == "bad-holder-proof" &&
                   !detail::worker_rvc_verifies(*domain, 0);
    detail::fill_wire_metrics(rec, rig.transport().stats());
    rec.ledger_reads = domain->resolver_stats->ledger_reads.load();
  } else if (scenario.name == "adversarial-replay") {
    auto ledger = std::make_shared<Ledger>();
    auto domain = deploy_domain(
        detail::domain_config("A", run_seed, scenario.transport), ledger);
    // present the same VP twice against one issued challenge
    AgentHandle& w = domain->worker(0);
    AgentHandle& verifier = domain->identity_issuer;
    Challenge challenge =
        make_challenge(*verifier.rng, domain->clock, w.did.str());
    verifier.challenges->issue(challenge);
    Selection sel = select_credentials(w.wallet, basic_agent_definition());
    VerifiablePresentation vp =
        create_presentation(w.wallet.keypair(), w.did, sel,
                            basic_agent_definition().pd_id, challenge,
                            verifier.did, domain->clock);
    detail::RunClock t;
    auto first = verify_presentation(
        vp, basic_agent_definition(), challenge, verifier.did,
        *verifier.resolver, verifier.wallet.registry(), *verifier.challenges,
        domain->clock);
    auto second = verify_presentation(
        vp, basic_agent_definition(), challenge, verifier.did,
        *verifier.resolver, verifier.wallet.registry(), *verifier.challenges,
        domain->clock);
    rec.wall_time_ms = t.elapsed_ms();
    rec.completed = false;
    rec.failure_reason = second.reason;
    rec.defended = first.ok && !second.ok && second.reason == "replayed-challenge";
    rec.ledger_reads = domain->resolver_stats->ledger_reads.load();
  } else if (scenario.name == "adversarial-untrusted-issuer") {
    auto setup = detail::cross_auth_setup(run_seed, scenario.transport,
                                          /*trust_foreign_issuer=*/false);
    SessionRig rig(scenario.transport);
    detail::RunClock t;
    auto [result, responder_state] = detail::run_cross_auth(setup, rig);
    rec.wall_time_ms = t.elapsed_ms();
    rec.completed = false;
    rec.failure_reason = result.failure_reason;
    rec.defended = !result.authenticated &&
                   result.failure_reason == "vc-rejected(untrusted-issuer)";
    detail::fill_wire_metrics(rec, rig.transport().stats());
    rec.ledger_reads = setup.domain_a->resolver_stats->ledger_reads.load() +
                       setup.domain_b->resolver_stats->ledger_reads.load();
  } else if (scenario.name == "adversarial-downgrade") {
    auto ledger = std::make_shared<Ledger>();
    auto domain = deploy_domain(
        detail::domain_config("A", run_seed, scenario.transport), ledger);
    SessionRig rig(scenario.transport);
    Transport* inner = &rig.transport();
    std::string manifest_id = domain->manifest.manifest_id;
    // suppress AUTH_COMPLETE, then try to skip straight to the application
    MiddleboxTransport middlebox(
        *inner,
        [inner, manifest_id](const Envelope& env, const std::string& endpoint)
            -> std::optional<Envelope> {
          if (env.message.kind != MsgKind::kAuthComplete) return env;
          Envelope forged;
          forged.id = env.message.sequence + 1;
          forged.message_id = "00000000-0000-4000-8000-000000000000";
          forged.message =
              ProtocolMessage{env.message.thread_id, env.message.sequence + 1,
                              MsgKind::kCredApplication,
                              Json{{"manifest_id", manifest_id}}};
          inner->send(forged, endpoint);
          return std::nullopt;
        });
    detail::RunClock t;
    auto result = run_attestation(*domain, 0, rig, &middlebox);
    rec.wall_time_ms = t.elapsed_ms();
    rec.completed = false;
    rec.failure_reason = result.issuer.failure_reason;
    rec.defended = !result.done &&
                   result.issuer.failure_reason == "not-authenticated" &&
                   !detail::worker_rvc_verifies(*domain, 0);
    detail::fill_wire_metrics(rec, rig.transport().stats());
    rec.ledger_reads = domain->resolver_stats->ledger_reads.load();
  } else if (scenario.name == "adversarial-rotate-mid-session") {
    auto ledger = std::make_shared<Ledger>();
    auto domain = deploy_domain(
        detail::domain_config("A", run_seed, scenario.transport), ledger);
    Domain* d = domain.get();
    SessionRig rig(scenario.transport);
    // rotate the issuer's ledger key while its presentation is in flight
    auto rotate_issuer = [d, ledger] {
      KeyPair old_keys = d->identity_issuer.wallet.keypair();
      KeyPair new_keys = generate_keypair(
          derive_seed(old_keys.seed, "rotated"), old_keys.key_id);
      DidDocument doc = ledger->resolve(d->identity_issuer.did);
      doc.verification_methods[0].public_key =
          multibase_encode_key(new_keys.public_key);
      ledger->update_did_doc(d->identity_issuer.did, doc,
                             sign_document(doc, old_keys));
    };
    bool rotated = false;
    MiddleboxTransport rotator(
        rig.transport(),
        [&rotated, rotate_issuer](const Envelope& env, const std::string&)
            -> std::optional<Envelope> {
          if (env.message.kind == MsgKind::kAuthResponse && !rotated) {
            rotated = true;
            rotate_issuer();
          }
          return env;
        });
    detail::RunClock t;
    auto result = run_attestation(*domain, 0, rig, &rotator);
    rec.wall_time_ms = t.elapsed_ms();
    rec.completed = false;
    rec.failure_reason = result.failure_reason;
    rec.defended = !result.done && result.failure_reason == "bad-holder-proof" &&
                   ledger->history(d->identity_issuer.did).size() == 2;
    detail::fill_wire_metrics(rec, rig.transport().stats());
    rec.ledger_reads = domain->resolver_stats->ledger_reads.load();
  }
  return rec;
}

inline RunReport run_scenario(const Scenario& scenario) {
  scenario.validate();
  RunReport report;
  report.scenario = scenario.name;
  report.seed_hex = to_hex(scenario.seed);
  report.transport = scenario.transport;
  if (scenario.adversarial()) report.defense_rate = 0;
  for (int r = 0; r < scenario.runs; ++r)
    report.records.push_back(execute_run(scenario, r));
  if (scenario.adversarial() && !report.records.empty())
    report.expected_failure_reason = report.records.front().failure_reason;
  report.aggregate();
  return report;
}

}  // namespace fabric
