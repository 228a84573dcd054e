#pragma once

#include <sodium.h>

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <string>

#include "fabric/bytes.hpp"
#include "fabric/canonical_json.hpp"
#include "fabric/error.hpp"

namespace fabric {

inline constexpr std::size_t kSeedSize = 32;
inline constexpr std::size_t kPublicKeySize = 32;
inline constexpr std::size_t kSignatureSize = 64;

/// Ed25519 signing key material plus the fragment naming it inside a DID
/// document. The public key is always re-derivable from the seed.
struct KeyPair {
  Bytes seed;        // 32 octets
  Bytes public_key;  // 32 octets
  std::string key_id;
};

inline Bytes ed25519_public_key(std::span<const std::uint8_t> seed) {
  if (seed.size() != kSeedSize)
    throw Error("seed-length", "Ed25519 seed must be exactly 32 octets");
  ensure_sodium();
  Bytes pk(crypto_sign_PUBLICKEYBYTES);
  Bytes sk(crypto_sign_SECRETKEYBYTES);
  crypto_sign_seed_keypair(pk.data(), sk.data(), seed.data());
  sodium_memzero(sk.data(), sk.size());
  return pk;
}

inline KeyPair generate_keypair(std::span<const std::uint8_t> seed,
                                std::string key_id = "key-1") {
  return KeyPair{Bytes(seed.begin(), seed.end()), ed25519_public_key(seed),
                 std::move(key_id)};
}

/// Raw RFC 8032 Ed25519 signature over a message (no JWS framing).
inline Bytes ed25519_sign(std::span<const std::uint8_t> message,
                          std::span<const std::uint8_t> seed) {
  if (seed.size() != kSeedSize)
    throw Error("seed-length", "Ed25519 seed must be exactly 32 octets");
  ensure_sodium();
  Bytes pk(crypto_sign_PUBLICKEYBYTES);
  Bytes sk(crypto_sign_SECRETKEYBYTES);
  crypto_sign_seed_keypair(pk.data(), sk.data(), seed.data());
  Bytes sig(crypto_sign_BYTES);
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(),
                       sk.data());
  sodium_memzero(sk.data(), sk.size());
  return sig;
}

namespace detail {

/// Optional memo for signature checks. Verification is a pure function, so
/// callers that re-verify identical inputs many times (exhaustive protocol
/// exploration) can scope a cache without changing results.
inline thread_local std::map<std::array<std::uint8_t, 32>, bool>* verify_memo =
    nullptr;

}  // namespace detail

class VerifyMemoScope {
 public:
  VerifyMemoScope() { detail::verify_memo = &memo_; }
  ~VerifyMemoScope() { detail::verify_memo = nullptr; }
  VerifyMemoScope(const VerifyMemoScope&) = delete;
  VerifyMemoScope& operator=(const VerifyMemoScope&) = delete;

 private:
  std::map<std::array<std::uint8_t, 32>, bool> memo_;
};

inline bool ed25519_verify(std::span<const std::uint8_t> message,
                           std::span<const std::uint8_t> signature,
                           std::span<const std::uint8_t> public_key) {
  ensure_sodium();
  if (signature.size() != kSignatureSize || public_key.size() != kPublicKeySize)
    return false;
  if (detail::verify_memo) {
    Bytes keyed(message.begin(), message.end());
    keyed.insert(keyed.end(), signature.begin(), signature.end());
    keyed.insert(keyed.end(), public_key.begin(), public_key.end());
    Bytes digest = sha256(keyed);
    std::array<std::uint8_t, 32> key;
    std::copy(digest.begin(), digest.end(), key.begin());
    auto it = detail::verify_memo->find(key);
    if (it != detail::verify_memo->end()) return it->second;
    bool ok = crypto_sign_verify_detached(signature.data(), message.data(),
                                          message.size(),
                                          public_key.data()) == 0;
    detail::verify_memo->emplace(key, ok);
    return ok;
  }
  return crypto_sign_verify_detached(signature.data(), message.data(),
                                     message.size(), public_key.data()) == 0;
}

/// Detached JWS: fixed EdDSA protected header, empty payload segment in the
/// compact form, base64url without padding throughout.
struct DetachedSignature {
  Json protected_header;  // {"alg":"EdDSA","b64":false,"crit":["b64"]}
  Bytes signature;        // 64 octets

  std::string compact_form() const {
    return base64url_encode(canonicalize(protected_header)) + ".." +
           base64url_encode(signature);
  }

  static DetachedSignature from_compact(const std::string& compact) {
    auto first = compact.find('.');
    auto second = compact.find('.', first + 1);
    if (first == std::string::npos || second != first + 1 ||
        compact.find('.', second + 1) != std::string::npos)
      throw Error("malformed-jws", "expected header..signature form");
    Json header = Json::parse(
        to_string(base64url_decode(compact.substr(0, first))), nullptr, false);
    if (header.is_discarded())
      throw Error("malformed-jws", "protected header is not JSON");
    Bytes sig = base64url_decode(compact.substr(second + 1));
    return DetachedSignature{std::move(header), std::move(sig)};
  }
};

inline Json jws_protected_header() {
  return Json{{"alg", "EdDSA"}, {"b64", false}, {"crit", Json::array({"b64"})}};
}

/// JWS signing input: base64url(header) "." base64url(payload). The payload
/// itself never travels inside the JWS (detached).
inline Bytes jws_signing_input(const Json& protected_header,
                               std::span<const std::uint8_t> payload) {
  std::string input = base64url_encode(canonicalize(protected_header)) + "." +
                      base64url_encode(payload);
  return to_bytes(input);
}

inline DetachedSignature sign_detached(std::span<const std::uint8_t> payload,
                                       const KeyPair& key) {
  if (payload.empty()) throw Error("empty-payload", "nothing to sign");
  Json header = jws_protected_header();
  Bytes sig = ed25519_sign(jws_signing_input(header, payload), key.seed);
  return DetachedSignature{std::move(header), std::move(sig)};
}

/// Accepts iff the header pins EdDSA with the expected detachment flags and
/// the Ed25519 signature validates over the signing input.
inline Verdict verify_detached(std::span<const std::uint8_t> payload,
                               const DetachedSignature& sig,
                               std::span<const std::uint8_t> public_key) {
  const Json& h = sig.protected_header;
  if (!h.is_object() || h.value("alg", "") != "EdDSA")
    return Verdict::reject("bad-header");
  if (!h.contains("b64") || !h["b64"].is_boolean() || h["b64"].get<bool>())
    return Verdict::reject("bad-header");
  if (sig.signature.size() != kSignatureSize ||
      public_key.size() != kPublicKeySize)
    return Verdict::reject("malformed");
  Bytes input;
  try {
    input = jws_signing_input(h, payload);
  } catch (const Error&) {
    return Verdict::reject("malformed");
  }
  if (!ed25519_verify(input, sig.signature, public_key))
    return Verdict::reject("bad-signature");
  return Verdict::accept();
}

inline Verdict verify_detached_compact(std::span<const std::uint8_t> payload,
                                       const std::string& compact,
                                       std::span<const std::uint8_t> public_key) {
  DetachedSignature sig;
  try {
    sig = DetachedSignature::from_compact(compact);
  } catch (const Error&) {
    return Verdict::reject("malformed");
  }
  return verify_detached(payload, sig, public_key);
}

}  // namespace fabric
