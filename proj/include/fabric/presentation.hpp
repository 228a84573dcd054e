#pragma once

#include <algorithm>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fabric/credentials.hpp"

namespace fabric {

/// Presentation Exchange subset: flat descriptors with a required credential
/// type, dot-separated claim paths, and an optional issuer allow-list. No
/// submission_requirements groups, no JSONPath.
struct InputDescriptor {
  std::string descriptor_id;
  std::string required_credential_type;
  std::vector<std::string> required_claims;  // dot-separated paths
  std::set<std::string> issuer_constraint;   // empty = any issuer

  bool operator==(const InputDescriptor&) const = default;

  Json to_json() const {
    Json j{{"descriptor_id", descriptor_id},
           {"required_credential_type", required_credential_type},
           {"required_claims", required_claims}};
    if (!issuer_constraint.empty()) j["issuer_constraint"] = issuer_constraint;
    return j;
  }

  static InputDescriptor from_json(const Json& j) {
    InputDescriptor d;
    d.descriptor_id = j.at("descriptor_id").get<std::string>();
    d.required_credential_type = j.at("required_credential_type").get<std::string>();
    d.required_claims = j.value("required_claims", std::vector<std::string>{});
    if (j.contains("issuer_constraint"))
      d.issuer_constraint = j["issuer_constraint"].get<std::set<std::string>>();
    return d;
  }
};

struct PresentationDefinition {
  std::string pd_id;
  std::vector<InputDescriptor> input_descriptors;

  bool operator==(const PresentationDefinition&) const = default;

  void validate() const {
    if (input_descriptors.empty())
      throw Error("malformed-definition", "at least one input descriptor required");
    std::set<std::string> seen;
    for (const auto& d : input_descriptors)
      if (!seen.insert(d.descriptor_id).second)
        throw Error("malformed-definition", "duplicate descriptor " + d.descriptor_id);
  }

  Json to_json() const {
    Json ds = Json::array();
    for (const auto& d : input_descriptors) ds.push_back(d.to_json());
    return Json{{"pd_id", pd_id}, {"input_descriptors", ds}};
  }

  static PresentationDefinition from_json(const Json& j) {
    PresentationDefinition pd;
    pd.pd_id = j.at("pd_id").get<std::string>();
    for (const auto& d : j.at("input_descriptors"))
      pd.input_descriptors.push_back(InputDescriptor::from_json(d));
    pd.validate();
    return pd;
  }
};

inline bool claim_path_exists(const Json& claims, const std::string& path) {
  const Json* cur = &claims;
  std::size_t start = 0;
  while (true) {
    std::size_t dot = path.find('.', start);
    std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (!cur->is_object() || !cur->contains(key)) return false;
    cur = &(*cur)[key];
    if (dot == std::string::npos) return true;
    start = dot + 1;
  }
}

/// Replay protection the protocols hang off: a fresh nonce bound to an
/// expected prover (when known) and consumed on first verification attempt.
struct Challenge {
  std::string nonce;     // 16 octets, base64url
  std::string audience;  // DID string of the prover, may be empty pre-handshake
  std::string issued_at;
  std::uint64_t issued_tick = 0;
  std::uint64_t ttl = 120;  // seconds

  bool operator==(const Challenge&) const = default;

  bool expired(std::uint64_t now_tick) const {
    return now_tick > issued_tick + ttl;
  }

  Json to_json() const {
    return Json{{"nonce", nonce},
                {"audience", audience},
                {"issued_at", issued_at},
                {"issued_tick", issued_tick},
                {"ttl", ttl}};
  }

  static Challenge from_json(const Json& j) {
    Challenge c;
    c.nonce = j.at("nonce").get<std::string>();
    c.audience = j.value("audience", "");
    c.issued_at = j.value("issued_at", "");
    c.issued_tick = j.value("issued_tick", 0ull);
    c.ttl = j.value("ttl", 120ull);
    return c;
  }
};

inline Challenge make_challenge(DeterministicRng& rng, const LogicalClock& clock,
                                std::string audience = {},
                                std::uint64_t ttl = 120) {
  return Challenge{base64url_encode(rng.next(16)), std::move(audience),
                   clock.now_iso(), clock.ticks(), ttl};
}

/// Issued-nonce store with atomic consume-on-verify. Copyable so protocol
/// state can be snapshotted (the mutex itself carries no state).
class ChallengeStore {
 public:
  ChallengeStore() = default;
  ChallengeStore(const ChallengeStore& other) {
    std::lock_guard lock(other.mutex_);
    issued_ = other.issued_;
    consumed_ = other.consumed_;
  }
  ChallengeStore& operator=(const ChallengeStore& other) {
    if (this == &other) return *this;
    std::scoped_lock lock(mutex_, other.mutex_);
    issued_ = other.issued_;
    consumed_ = other.consumed_;
    return *this;
  }

  void issue(const Challenge& c) {
    std::lock_guard lock(mutex_);
    issued_.insert(c.nonce);
  }

  enum class Consume { kOk, kReplayed, kUnknown };

  Consume consume(const std::string& nonce) {
    std::lock_guard lock(mutex_);
    if (consumed_.contains(nonce)) return Consume::kReplayed;
    if (!issued_.contains(nonce)) return Consume::kUnknown;
    consumed_.insert(nonce);
    return Consume::kOk;
  }

  Json snapshot() const {
    std::lock_guard lock(mutex_);
    return Json{{"issued", issued_}, {"consumed", consumed_}};
  }

 private:
  mutable std::mutex mutex_;
  std::set<std::string> issued_;
  std::set<std::string> consumed_;
};

struct SubmissionEntry {
  std::string descriptor_id;
  std::size_t credential_index = 0;

  bool operator==(const SubmissionEntry&) const = default;
};

struct VerifiablePresentation {
  std::vector<std::string> context = default_context();
  std::vector<std::string> types{"VerifiablePresentation"};
  Did holder;
  std::vector<VerifiableCredential> credentials;
  std::string pd_id;
  std::vector<SubmissionEntry> descriptor_map;
  Proof proof;

  bool operator==(const VerifiablePresentation&) const = default;

  Json to_json() const {
    Json creds = Json::array();
    for (const auto& vc : credentials) creds.push_back(vc.to_json());
    Json dmap = Json::array();
    for (const auto& e : descriptor_map)
      dmap.push_back({{"descriptor_id", e.descriptor_id},
                      {"credential_index", e.credential_index}});
    return Json{{"context", context},
                {"types", types},
                {"holder", holder.str()},
                {"credentials", creds},
                {"submission", Json{{"pd_id", pd_id}, {"descriptor_map", dmap}}},
                {"proof", proof.to_json()}};
  }

  static VerifiablePresentation from_json(const Json& j) {
    try {
      VerifiablePresentation vp;
      vp.context = j.at("context").get<std::vector<std::string>>();
      vp.types = j.at("types").get<std::vector<std::string>>();
      vp.holder = parse_did(j.at("holder").get<std::string>());
      for (const auto& c : j.at("credentials"))
        vp.credentials.push_back(VerifiableCredential::from_json(c));
      const Json& sub = j.at("submission");
      vp.pd_id = sub.at("pd_id").get<std::string>();
      for (const auto& e : sub.at("descriptor_map"))
        vp.descriptor_map.push_back({e.at("descriptor_id").get<std::string>(),
                                     e.at("credential_index").get<std::size_t>()});
      vp.proof = Proof::from_json(j.at("proof"));
      return vp;
    } catch (const Json::exception& e) {
      throw Error("malformed-presentation", e.what());
    }
  }
};

using Selection = std::vector<std::pair<std::string, VerifiableCredential>>;

/// Picks one credential per descriptor from the holder's set. Tie-break is
/// deterministic: newest issuance_date, then lexicographically greatest
/// cred_id. Throws Unsatisfiable naming the first unmet descriptor.
inline Selection select_credentials(const std::vector<VerifiableCredential>& held,
                                    const PresentationDefinition& pd) {
  pd.validate();
  Selection out;
  for (const auto& d : pd.input_descriptors) {
    const VerifiableCredential* best = nullptr;
    for (const auto& vc : held) {
      if (!vc.has_type(d.required_credential_type)) continue;
      bool claims_ok = true;
      for (const auto& path : d.required_claims)
        if (!claim_path_exists(vc.claims, path)) {
          claims_ok = false;
          break;
        }
      if (!claims_ok) continue;
      if (!d.issuer_constraint.empty() &&
          !d.issuer_constraint.contains(vc.issuer.str()))
        continue;
      if (!best || vc.issuance_date > best->issuance_date ||
          (vc.issuance_date == best->issuance_date && vc.cred_id > best->cred_id))
        best = &vc;
    }
    if (!best) throw Error("unsatisfiable", d.descriptor_id);
    out.emplace_back(d.descriptor_id, *best);
  }
  return out;
}

inline VerifiablePresentation create_presentation(
    const KeyPair& holder_key, const Did& holder, const Selection& selections,
    const std::string& pd_id, const Challenge& challenge, const Did& verifier,
    const LogicalClock& clock) {
  if (selections.empty())
    throw Error("unsatisfiable", "no credentials selected");
  if (challenge.expired(clock.ticks()))
    throw Error("expired-challenge", "challenge ttl elapsed");

  VerifiablePresentation vp;
  vp.holder = holder;
  vp.pd_id = pd_id;
  for (const auto& [descriptor_id, vc] : selections) {
    vp.descriptor_map.push_back({descriptor_id, vp.credentials.size()});
    vp.credentials.push_back(vc);
  }
  vp.proof.created = clock.now_iso();
  vp.proof.verification_method = holder.str() + "#" + holder_key.key_id;
  vp.proof.proof_purpose = "authentication";
  vp.proof.challenge = challenge.nonce;
  vp.proof.domain = verifier.str();
  vp.proof.jws =
      sign_detached(detail::proof_payload(vp.to_json()), holder_key).compact_form();
  return vp;
}

struct PresentationOutcome {
  bool ok = false;
  std::string reason;
  std::map<std::string, Json> claims;  // per descriptor_id, set on accept

  static PresentationOutcome accept(std::map<std::string, Json> claims) {
    return {true, {}, std::move(claims)};
  }
  static PresentationOutcome reject(std::string reason) {
    return {false, std::move(reason), {}};
  }
  explicit operator bool() const noexcept { return ok; }
};

/// Two-stage verification in the fixed order: (1) holder proof, (2) challenge
/// and audience binding, (3) submission covers the definition, (4) each
/// mapped credential, (5) holder binding of every credential subject. The
/// first failing stage names the reason.
inline PresentationOutcome verify_presentation(
    const VerifiablePresentation& vp, const PresentationDefinition& pd,
    const Challenge& expected, const Did& verifier, Resolver& resolver,
    const TrustRegistry& registry, ChallengeStore& nonces,
    const LogicalClock& clock) {
  // stage 1: holder proof
  auto holder_doc = resolver.try_resolve(vp.holder);
  if (!holder_doc) return PresentationOutcome::reject("bad-holder-proof");
  auto signer = vp.proof.signer();
  if (!signer || *signer != vp.holder)
    return PresentationOutcome::reject("bad-holder-proof");
  auto key = holder_doc->authentication_key(vp.proof.key_id());
  if (!key) return PresentationOutcome::reject("bad-holder-proof");
  if (vp.proof.proof_purpose != "authentication")
    return PresentationOutcome::reject("bad-holder-proof");
  if (!verify_detached_compact(detail::proof_payload(vp.to_json()), vp.proof.jws,
                               *key))
    return PresentationOutcome::reject("bad-holder-proof");

  // stage 2: challenge binding, single use, audience
  if (vp.proof.challenge != expected.nonce)
    return PresentationOutcome::reject("bad-challenge");
  if (vp.proof.domain != verifier.str())
    return PresentationOutcome::reject("bad-challenge");
  if (!expected.audience.empty() && expected.audience != vp.holder.str())
    return PresentationOutcome::reject("bad-challenge");
  if (expected.expired(clock.ticks()))
    return PresentationOutcome::reject("bad-challenge");
  switch (nonces.consume(expected.nonce)) {
    case ChallengeStore::Consume::kOk:
      break;
    case ChallengeStore::Consume::kReplayed:
      return PresentationOutcome::reject("replayed-challenge");
    case ChallengeStore::Consume::kUnknown:
      return PresentationOutcome::reject("bad-challenge");
  }

  // stage 3: submission shape
  if (vp.pd_id != pd.pd_id)
    return PresentationOutcome::reject("submission-mismatch");
  std::map<std::string, std::size_t> mapped;
  for (const auto& e : vp.descriptor_map) {
    if (mapped.contains(e.descriptor_id) || e.credential_index >= vp.credentials.size())
      return PresentationOutcome::reject("submission-mismatch");
    mapped[e.descriptor_id] = e.credential_index;
  }
  for (const auto& d : pd.input_descriptors)
    if (!mapped.contains(d.descriptor_id))
      return PresentationOutcome::reject("submission-mismatch");

  // stage 4: each mapped credential, then its descriptor constraints
  std::map<std::string, Json> claims;
  for (const auto& d : pd.input_descriptors) {
    const VerifiableCredential& vc = vp.credentials[mapped[d.descriptor_id]];
    if (auto verdict = verify_credential(vc, resolver, registry); !verdict)
      return PresentationOutcome::reject("vc-rejected(" + verdict.reason + ")");
    if (!vc.has_type(d.required_credential_type))
      return PresentationOutcome::reject("submission-mismatch");
    for (const auto& path : d.required_claims)
      if (!claim_path_exists(vc.claims, path))
        return PresentationOutcome::reject("submission-mismatch");
    if (!d.issuer_constraint.empty() &&
        !d.issuer_constraint.contains(vc.issuer.str()))
      return PresentationOutcome::reject("vc-rejected(untrusted-issuer)");
    claims[d.descriptor_id] = vc.claims;
  }

  // stage 5: presented credentials must be bound to the DID under investigation
  for (const auto& vc : vp.credentials)
    if (vc.subject != vp.holder)
      return PresentationOutcome::reject("subject-mismatch");

  return PresentationOutcome::accept(std::move(claims));
}

}  // namespace fabric
