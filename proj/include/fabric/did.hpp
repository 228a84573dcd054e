#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fabric/canonical_json.hpp"
#include "fabric/crypto.hpp"
#include "fabric/error.hpp"

namespace fabric {

inline constexpr std::string_view kDidMethod = "agentsim";
// Off-ledger orchestrator identifiers carry this msid prefix; the ledger's
// self-certification rule can never produce it, so the two namespaces are
// disjoint by construction.
inline constexpr std::string_view kOrgMsidPrefix = "org-";

struct Did {
  std::string msid;

  std::string str() const { return "did:" + std::string(kDidMethod) + ":" + msid; }
  bool is_org() const { return msid.starts_with(kOrgMsidPrefix); }
  bool operator==(const Did&) const = default;
  auto operator<=>(const Did&) const = default;
};

inline Did parse_did(const std::string& s) {
  const std::string prefix = "did:" + std::string(kDidMethod) + ":";
  if (!s.starts_with(prefix))
    throw Error("malformed-did", "expected did:agentsim:<msid>, got '" + s + "'");
  std::string msid = s.substr(prefix.size());
  std::string body = msid;
  if (msid.starts_with(kOrgMsidPrefix)) body = msid.substr(kOrgMsidPrefix.size());
  if (!is_base58(body))
    throw Error("malformed-did", "method-specific id is not base58: '" + s + "'");
  return Did{std::move(msid)};
}

inline std::string serialize_did(const Did& d) { return d.str(); }

/// Method-specific identifier from a public key: base58 of the 16-octet
/// truncated SHA-256 of the key. Registration is unforgeable without any
/// consensus layer because the id commits to the key.
inline std::string self_certifying_msid(std::span<const std::uint8_t> public_key) {
  Bytes digest = sha256(public_key);
  digest.resize(16);
  return base58_encode(digest);
}

// publicKeyMultibase: base58btc with the ed25519-pub multicodec prefix.
inline std::string multibase_encode_key(std::span<const std::uint8_t> public_key) {
  Bytes prefixed{0xed, 0x01};
  prefixed.insert(prefixed.end(), public_key.begin(), public_key.end());
  return "z" + base58_encode(prefixed);
}

inline std::optional<Bytes> multibase_decode_key(const std::string& encoded);

struct VerificationMethod {
  std::string key_id;
  Did controller;
  std::string public_key;  // Ed25519, multibase

  bool operator==(const VerificationMethod&) const = default;
};

struct ServiceEndpoint {
  std::string service_id;
  std::string type;
  std::string endpoint;

  bool operator==(const ServiceEndpoint&) const = default;
};

struct DidDocument {
  Did id;
  std::vector<VerificationMethod> verification_methods;
  std::vector<std::string> authentication;  // key_id references
  std::vector<ServiceEndpoint> services;

  bool operator==(const DidDocument&) const = default;

  Json to_json() const {
    Json vm = Json::array();
    for (const auto& m : verification_methods)
      vm.push_back({{"key_id", m.key_id},
                    {"controller", m.controller.str()},
                    {"public_key", m.public_key}});
    Json svc = Json::array();
    for (const auto& s : services)
      svc.push_back({{"service_id", s.service_id},
                     {"type", s.type},
                     {"endpoint", s.endpoint}});
    return Json{{"id", id.str()},
                {"verification_methods", vm},
                {"authentication", authentication},
                {"services", svc}};
  }

  static DidDocument from_json(const Json& j) {
    try {
      DidDocument doc;
      doc.id = parse_did(j.at("id").get<std::string>());
      for (const auto& m : j.at("verification_methods")) {
        doc.verification_methods.push_back(
            {m.at("key_id").get<std::string>(),
             parse_did(m.at("controller").get<std::string>()),
             m.at("public_key").get<std::string>()});
      }
      doc.authentication = j.at("authentication").get<std::vector<std::string>>();
      for (const auto& s : j.value("services", Json::array()))
        doc.services.push_back({s.at("service_id").get<std::string>(),
                                s.at("type").get<std::string>(),
                                s.at("endpoint").get<std::string>()});
      doc.validate();
      return doc;
    } catch (const Json::exception& e) {
      throw Error("malformed-document", e.what());
    }
  }

  /// Structural invariants: key_ids unique, at least one authentication key,
  /// every authentication reference resolves to a listed method.
  void validate() const {
    std::set<std::string> ids;
    for (const auto& m : verification_methods) {
      if (m.key_id.empty() || !ids.insert(m.key_id).second)
        throw Error("malformed-document", "duplicate or empty key_id");
      if (!multibase_decode_key(m.public_key))
        throw Error("malformed-document", "bad multibase key " + m.public_key);
    }
    if (authentication.empty())
      throw Error("malformed-document", "no authentication key");
    for (const auto& ref : authentication)
      if (!ids.contains(ref))
        throw Error("malformed-document", "dangling authentication ref " + ref);
  }

  std::optional<Bytes> authentication_key(const std::string& key_id) const {
    if (std::find(authentication.begin(), authentication.end(), key_id) ==
        authentication.end())
      return std::nullopt;
    for (const auto& m : verification_methods)
      if (m.key_id == key_id) return multibase_decode_key(m.public_key);
    return std::nullopt;
  }

  /// Key the self-certification rule applies to.
  Bytes first_authentication_key() const {
    if (authentication.empty())
      throw Error("malformed-document", "no authentication key");
    auto pk = authentication_key(authentication.front());
    if (!pk) throw Error("malformed-document", "dangling authentication ref");
    return *pk;
  }
};

inline std::optional<Bytes> multibase_decode_key(const std::string& encoded) {
  if (encoded.size() < 2 || encoded[0] != 'z') return std::nullopt;
  std::string body = encoded.substr(1);
  if (!is_base58(body)) return std::nullopt;
  // decode base58 into bytes
  Bytes out;
  std::vector<std::uint8_t> digits;
  for (char c : body) {
    std::uint32_t carry =
        static_cast<std::uint32_t>(kBase58Alphabet.find(c));
    for (auto& d : digits) {
      carry += static_cast<std::uint32_t>(d) * 58;
      d = static_cast<std::uint8_t>(carry & 0xff);
      carry >>= 8;
    }
    while (carry > 0) {
      digits.push_back(static_cast<std::uint8_t>(carry & 0xff));
      carry >>= 8;
    }
  }
  for (char c : body) {
    if (c != '1') break;
    out.push_back(0);
  }
  out.insert(out.end(), digits.rbegin(), digits.rend());
  if (out.size() != 34 || out[0] != 0xed || out[1] != 0x01) return std::nullopt;
  return Bytes(out.begin() + 2, out.end());
}

inline DidDocument make_document(const Did& did, const KeyPair& keys,
                                 std::vector<ServiceEndpoint> services) {
  DidDocument doc;
  doc.id = did;
  doc.verification_methods.push_back(
      {keys.key_id, did, multibase_encode_key(keys.public_key)});
  doc.authentication.push_back(keys.key_id);
  doc.services = std::move(services);
  return doc;
}

/// Ledger-anchored identity: the DID commits to the keypair's public key.
inline std::pair<Did, DidDocument> new_self_certified_document(
    const KeyPair& keys, std::vector<ServiceEndpoint> services = {}) {
  Did did{self_certifying_msid(keys.public_key)};
  return {did, make_document(did, keys, std::move(services))};
}

/// Off-ledger orchestrator identity, distributed inside its security domain
/// via wallet provisioning and never registered on the ledger.
inline std::pair<Did, DidDocument> new_org_document(
    const KeyPair& keys, std::vector<ServiceEndpoint> services = {}) {
  Did did{std::string(kOrgMsidPrefix) + self_certifying_msid(keys.public_key)};
  return {did, make_document(did, keys, std::move(services))};
}

}  // namespace fabric
