#pragma once

#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fabric/canonical_json.hpp"
#include "fabric/crypto.hpp"
#include "fabric/did.hpp"
#include "fabric/resolver.hpp"

namespace fabric {

inline constexpr std::string_view kVcBaseType = "VerifiableCredential";
inline constexpr std::string_view kBasicType = "BasicAgentCredential";
inline constexpr std::string_view kRichType = "RichAgentCredential";
inline constexpr std::string_view kProofType = "Ed25519DetachedJws2020";

inline const std::vector<std::string>& default_context() {
  static const std::vector<std::string> ctx{
      "https://www.w3.org/ns/credentials/v2",
      "https://agentsim.example/credentials/v1"};
  return ctx;
}

/// Proof block shared by credentials (assertionMethod) and presentations
/// (authentication, with challenge/domain). The jws covers the canonical
/// bytes of the whole enclosing document with only the jws member removed,
/// so every proof field is itself tamper-evident.
struct Proof {
  std::string proof_type{kProofType};
  std::string created;
  std::string verification_method;  // "did:...#key_id"
  std::string proof_purpose;        // assertionMethod | authentication
  std::string challenge;            // VP only
  std::string domain;               // VP only
  std::string jws;                  // detached compact form

  bool operator==(const Proof&) const = default;

  Json to_json() const {
    Json j{{"proof_type", proof_type},
           {"created", created},
           {"verification_method", verification_method},
           {"proof_purpose", proof_purpose},
           {"jws", jws}};
    if (!challenge.empty()) j["challenge"] = challenge;
    if (!domain.empty()) j["domain"] = domain;
    return j;
  }

  static Proof from_json(const Json& j) {
    Proof p;
    p.proof_type = j.value("proof_type", "");
    p.created = j.value("created", "");
    p.verification_method = j.value("verification_method", "");
    p.proof_purpose = j.value("proof_purpose", "");
    p.challenge = j.value("challenge", "");
    p.domain = j.value("domain", "");
    p.jws = j.value("jws", "");
    return p;
  }

  /// DID part of verification_method, empty Did on malformed input.
  std::optional<Did> signer() const {
    auto hash = verification_method.find('#');
    if (hash == std::string::npos) return std::nullopt;
    try {
      return parse_did(verification_method.substr(0, hash));
    } catch (const Error&) {
      return std::nullopt;
    }
  }

  std::string key_id() const {
    auto hash = verification_method.find('#');
    return hash == std::string::npos ? std::string()
                                     : verification_method.substr(hash + 1);
  }
};

struct VerifiableCredential {
  std::vector<std::string> context = default_context();
  std::string cred_id;
  std::vector<std::string> types;
  Did issuer;
  std::string issuance_date;
  Did subject;
  Json claims = Json::object();
  Proof proof;

  bool operator==(const VerifiableCredential&) const = default;

  bool has_type(std::string_view t) const {
    for (const auto& x : types)
      if (x == t) return true;
    return false;
  }

  Json to_json() const {
    return Json{{"context", context},
                {"cred_id", cred_id},
                {"types", types},
                {"issuer", issuer.str()},
                {"issuance_date", issuance_date},
                {"credential_subject", Json{{"id", subject.str()}, {"claims", claims}}},
                {"proof", proof.to_json()}};
  }

  static VerifiableCredential from_json(const Json& j) {
    try {
      VerifiableCredential vc;
      vc.context = j.at("context").get<std::vector<std::string>>();
      vc.cred_id = j.at("cred_id").get<std::string>();
      vc.types = j.at("types").get<std::vector<std::string>>();
      vc.issuer = parse_did(j.at("issuer").get<std::string>());
      vc.issuance_date = j.at("issuance_date").get<std::string>();
      const Json& cs = j.at("credential_subject");
      vc.subject = parse_did(cs.at("id").get<std::string>());
      vc.claims = cs.at("claims");
      vc.proof = Proof::from_json(j.at("proof"));
      return vc;
    } catch (const Json::exception& e) {
      throw Error("malformed-credential", e.what());
    }
  }
};

/// Named organizational trust: which issuers this verifier recognizes and
/// for which credential types.
struct TrustRegistry {
  struct Entry {
    std::set<std::string> accepted_types;
    std::string label;
    bool operator==(const Entry&) const = default;
  };
  std::map<std::string, Entry> trusted_issuers;  // key: did string
  std::string scope = "intra";                   // intra | cross

  bool operator==(const TrustRegistry&) const = default;

  Json to_json() const {
    Json issuers = Json::object();
    for (const auto& [did, e] : trusted_issuers)
      issuers[did] = Json{{"accepted_types", e.accepted_types}, {"label", e.label}};
    return Json{{"scope", scope}, {"trusted_issuers", issuers}};
  }

  static TrustRegistry from_json(const Json& j) {
    TrustRegistry r;
    r.scope = j.value("scope", "intra");
    static const Json kNoIssuers = Json::object();
    const Json& issuers = j.contains("trusted_issuers") ? j["trusted_issuers"]
                                                        : kNoIssuers;
    for (const auto& [did, e] : issuers.items()) {
      parse_did(did);  // validates
      Entry entry{e.at("accepted_types").get<std::set<std::string>>(),
                  e.value("label", "")};
      if (entry.accepted_types.empty())
        throw Error("malformed-registry", "empty accepted_types for " + did);
      r.trusted_issuers.emplace(did, std::move(entry));
    }
    return r;
  }

  bool accepts(const Did& issuer, std::string_view credential_type) const {
    auto it = trusted_issuers.find(issuer.str());
    return it != trusted_issuers.end() &&
           it->second.accepted_types.contains(std::string(credential_type));
  }

  bool knows(const Did& issuer) const {
    return trusted_issuers.contains(issuer.str());
  }
};

/// bVCs assert agenthood and nothing else; rVCs must carry at least one of
/// role/capabilities/authorizations. Returns an empty string when the shape
/// is fine, else a description.
inline std::string claim_shape_violation(std::string_view credential_type,
                                         const Json& claims) {
  if (!claims.is_object()) return "claims must be an object";
  if (credential_type == kBasicType) {
    if (claims.size() != 1 || !claims.contains("agent") ||
        !claims["agent"].is_boolean() || !claims["agent"].get<bool>())
      return "basic credentials carry only {\"agent\": true}";
    return {};
  }
  if (credential_type == kRichType) {
    if (!claims.contains("role") && !claims.contains("capabilities") &&
        !claims.contains("authorizations"))
      return "rich credentials need role, capabilities, or authorizations";
    return {};
  }
  return "unknown credential type " + std::string(credential_type);
}

namespace detail {

/// Canonical signing payload: the document with proof.jws removed. The proof
/// options (created, purpose, challenge, domain) stay under the signature.
inline Bytes proof_payload(Json document) {
  if (document.contains("proof")) document["proof"].erase("jws");
  return canonicalize(document);
}

inline std::string content_urn(const Json& unsigned_doc) {
  Bytes digest = sha256(canonicalize(unsigned_doc));
  digest.resize(16);
  return "urn:agentsim:vc:" + base58_encode(digest);
}

}  // namespace detail

inline VerifiableCredential issue_credential(
    const KeyPair& issuer_key, const Did& issuer_did, const Did& subject,
    const std::string& credential_type, const Json& claims,
    const std::string& issued_at) {
  if (auto why = claim_shape_violation(credential_type, claims); !why.empty())
    throw Error("claim-shape", why);
  if (subject == issuer_did)
    throw Error("claim-shape", "self-issued identity claims are not allowed");

  VerifiableCredential vc;
  vc.types = {std::string(kVcBaseType), credential_type};
  vc.issuer = issuer_did;
  vc.issuance_date = issued_at;
  vc.subject = subject;
  vc.claims = claims;
  vc.proof.created = issued_at;
  vc.proof.verification_method = issuer_did.str() + "#" + issuer_key.key_id;
  vc.proof.proof_purpose = "assertionMethod";

  Json unsigned_doc = vc.to_json();
  unsigned_doc.erase("proof");
  vc.cred_id = detail::content_urn(unsigned_doc);

  vc.proof.jws =
      sign_detached(detail::proof_payload(vc.to_json()), issuer_key).compact_form();
  return vc;
}

/// Full credential check in the order the reject reasons imply: issuer
/// resolution, key lookup, proof purpose, signature, organizational trust,
/// claim shape.
inline Verdict verify_credential(const VerifiableCredential& vc,
                                 Resolver& resolver,
                                 const TrustRegistry& registry) {
  auto issuer_doc = resolver.try_resolve(vc.issuer);
  if (!issuer_doc) return Verdict::reject("unresolvable-issuer");

  auto signer = vc.proof.signer();
  if (!signer || *signer != vc.issuer) return Verdict::reject("unknown-key");
  auto key = issuer_doc->authentication_key(vc.proof.key_id());
  if (!key) return Verdict::reject("unknown-key");

  if (vc.proof.proof_purpose != "assertionMethod")
    return Verdict::reject("bad-proof-purpose");

  if (!verify_detached_compact(detail::proof_payload(vc.to_json()), vc.proof.jws,
                               *key))
    return Verdict::reject("bad-signature");

  if (!registry.knows(vc.issuer)) return Verdict::reject("untrusted-issuer");

  std::string type;
  for (const auto& t : vc.types)
    if (t != kVcBaseType) type = t;
  if (type.empty() || !vc.has_type(kVcBaseType))
    return Verdict::reject("claim-shape");
  if (!registry.accepts(vc.issuer, type))
    return Verdict::reject("type-not-accepted");

  if (!claim_shape_violation(type, vc.claims).empty())
    return Verdict::reject("claim-shape");
  if (vc.subject == vc.issuer) return Verdict::reject("claim-shape");

  return Verdict::accept();
}

/// Deterministic stand-in for LLM claim interpretation: structured fields are
/// checked for presence and allowed values, unstructured text claims against
/// allow/deny keyword rules (case-insensitive substring match). Pluggable
/// seam: anything callable with (claims, policy) semantics can replace it.
struct ClaimPolicy {
  std::vector<std::string> required_fields;
  std::map<std::string, std::set<std::string>> allowed_values;
  std::vector<std::string> require_keywords;
  std::vector<std::string> deny_keywords;

  Json to_json() const {
    Json av = Json::object();
    for (const auto& [k, v] : allowed_values) av[k] = v;
    return Json{{"required_fields", required_fields},
                {"allowed_values", av},
                {"require_keywords", require_keywords},
                {"deny_keywords", deny_keywords}};
  }

  static ClaimPolicy from_json(const Json& j) {
    ClaimPolicy p;
    p.required_fields =
        j.value("required_fields", std::vector<std::string>{});
    if (j.contains("allowed_values"))
      for (const auto& [k, v] : j["allowed_values"].items())
        p.allowed_values[k] = v.get<std::set<std::string>>();
    p.require_keywords =
        j.value("require_keywords", std::vector<std::string>{});
    p.deny_keywords = j.value("deny_keywords", std::vector<std::string>{});
    return p;
  }
};

struct ClaimDecision {
  bool trusted = false;
  std::string reason;  // refusal reason, empty when trusted
};

namespace detail {

inline std::string lowercase(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline void collect_text(const Json& value, std::string& out) {
  if (value.is_string()) {
    out += lowercase(value.get<std::string>());
    out += '\n';
  } else if (value.is_object() || value.is_array()) {
    for (const auto& item : value) collect_text(item, out);
  }
}

}  // namespace detail

inline ClaimDecision evaluate_claims(const Json& claims, const ClaimPolicy& policy) {
  if (!claims.is_object()) return {false, "missing-field(claims)"};
  for (const auto& field : policy.required_fields)
    if (!claims.contains(field)) return {false, "missing-field(" + field + ")"};
  for (const auto& [field, allowed] : policy.allowed_values) {
    if (!claims.contains(field)) return {false, "missing-field(" + field + ")"};
    const Json& v = claims[field];
    if (!v.is_string() || !allowed.contains(v.get<std::string>()))
      return {false, "value-not-allowed(" + field + ")"};
  }
  std::string text;
  detail::collect_text(claims, text);
  for (const auto& kw : policy.deny_keywords)
    if (text.find(detail::lowercase(kw)) != std::string::npos)
      return {false, "denied-keyword(" + kw + ")"};
  for (const auto& kw : policy.require_keywords)
    if (text.find(detail::lowercase(kw)) == std::string::npos)
      return {false, "missing-keyword(" + kw + ")"};
  return {true, {}};
}

}  // namespace fabric
