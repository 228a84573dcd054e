#pragma once

// Pinned expected values. RFC 8032 §7.1 vectors are transcribed from the RFC;
// everything else was computed once by tests/oracle/gen_fixtures.py with
// implementations independent of this library (python `cryptography` for
// Ed25519, python stdlib json for canonical serialization).

#include <string>

#include "fabric/bytes.hpp"

namespace fixtures {

// RFC 8032 §7.1 TEST 1
inline const std::string kRfc8032Test1Seed =
    "9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60";
inline const std::string kRfc8032Test1Pk =
    "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a";
inline const std::string kRfc8032Test1Msg = "";
inline const std::string kRfc8032Test1Sig =
    "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e06522490155"
    "5fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b";

// RFC 8032 §7.1 TEST 2
inline const std::string kRfc8032Test2Seed =
    "4ccd089b28ff96da9db6c346ec114e0f5b8a319f35aba624da8cf6ed4fb8a6fb";
inline const std::string kRfc8032Test2Pk =
    "3d4017c3e843895a92b70aa74d1b7ebc9c982ccf2ec4968cc0cd55f12af4660c";
inline const std::string kRfc8032Test2Msg = "72";
inline const std::string kRfc8032Test2Sig =
    "92a009a9f0d4cab8720e820b5f642540a2b27b5416503f8fb3762223ebdb69da"
    "085ac1e43e15996e458f3613d0f11d8c387b2eaeb4302aeeb00d291612bb0c00";

// RFC 8032 §7.1 TEST 3
inline const std::string kRfc8032Test3Seed =
    "c5aa8df43f9f837bedb7442f31dcb7b166d38535076f094b85ce3a2e0b4458f7";
inline const std::string kRfc8032Test3Pk =
    "fc51cd8e6218a1a38da47ed00230f0580816ed13ba3303ac5deb911548908025";
inline const std::string kRfc8032Test3Msg = "af82";
inline const std::string kRfc8032Test3Sig =
    "6291d657deec24024827e69c3abe01a30ce548a284743a445e3680d7db5ac3ac"
    "18ff9b538d16f290ae67f760984dc6594a7c15e9716ed28dc027beceea1ec40a";

// public key for the all-zero 32-octet seed
inline const std::string kZeroSeedPk =
    "3b6a27bcceb6a42d62a3a8d02a6f0d73653215771de243a63ac048a18b59da29";

// three-level nested credential document (no proof) and its canonical bytes
inline const char* kNestedDocument = R"({
  "context": ["https://www.w3.org/ns/credentials/v2"],
  "cred_id": "urn:agentsim:vc:fixture-nested",
  "types": ["VerifiableCredential", "RichAgentCredential"],
  "issuer": "did:agentsim:FixtureIssuer111111111",
  "issuance_date": "2030-01-01T00:00:07Z",
  "credential_subject": {
    "id": "did:agentsim:FixtureSubject11111111",
    "claims": {
      "role": "travel-booking",
      "capabilities": ["quote", "book"],
      "limits": {"daily_budget": 250, "regions": ["eu", "us"]},
      "note": "may request price quotes on behalf of its principal"
    }
  }
})";
inline const std::string kNestedCanonical =
    "{\"context\":[\"https://www.w3.org/ns/credentials/v2\"],\"cred_id\":\"urn:"
    "agentsim:vc:fixture-nested\",\"credential_subject\":{\"claims\":{"
    "\"capabilities\":[\"quote\",\"book\"],\"limits\":{\"daily_budget\":250,"
    "\"regions\":[\"eu\",\"us\"]},\"note\":\"may request price quotes on "
    "behalf of its principal\",\"role\":\"travel-booking\"},\"id\":\"did:"
    "agentsim:FixtureSubject11111111\"},\"issuance_date\":\"2030-01-01T00:00:"
    "07Z\",\"issuer\":\"did:agentsim:FixtureIssuer111111111\",\"types\":["
    "\"VerifiableCredential\",\"RichAgentCredential\"]}";
inline const std::string kNestedCanonicalSha256 =
    "f45395e610b87b5487d4a07dc93901f5b6cd10e4267b2d4b38d99878027ec1cf";

// orchestrator fixture key: seed = 32 x 0x01
inline const std::string kOrchSeed =
    "0101010101010101010101010101010101010101010101010101010101010101";
inline const std::string kOrchPk =
    "8a88e3dd7409f195fd52db2d3cba5d72ca6709bf1d94121bf3748801b40f6f5c";

inline const std::string kJwsHeaderB64 =
    "eyJhbGciOiJFZERTQSIsImI2NCI6ZmFsc2UsImNyaXQiOlsiYjY0Il19";

// detached JWS over the nested document's canonical bytes, orchestrator key
inline const std::string kNestedDocJws =
    "eyJhbGciOiJFZERTQSIsImI2NCI6ZmFsc2UsImNyaXQiOlsiYjY0Il19.."
    "JTWvHM1hd1XvWAfuvxWupqIdChw0EWizxmdLLlUIDTdPwTRxo18-"
    "5BCL9-yY3gS1RjzBb5XagoApH7fw4Q0oCA";

// detached JWS over RFC 8032 TEST 2's message under the TEST 2 key
inline const std::string kRfc8032Test2Jws =
    "eyJhbGciOiJFZERTQSIsImI2NCI6ZmFsc2UsImNyaXQiOlsiYjY0Il19.."
    "ddUFeDA43NojBPOrCP9dqGvTOcjPAcen2g5Dd9xArqS1V6iQ9wY3CCQ1_"
    "VyWkiPfIWAp-256NdKXKFOia-JNDQ";

// self-certified DID for the RFC 8032 TEST 1 public key
inline const std::string kTest1Msid = "5CThzzdZPTPGPuLz6gwdFk";
inline const std::string kTest1Did = "did:agentsim:5CThzzdZPTPGPuLz6gwdFk";
inline const std::string kTest1PkMultibase =
    "z6MktwupdmLXVVqTzCw4i46r4uGyosGXRnR3XjN4Zq7oMMsw";

inline fabric::Bytes seed_of(const std::string& hex) { return fabric::from_hex(hex); }

inline fabric::Bytes fixed_seed(std::uint8_t fill) {
  return fabric::Bytes(32, fill);
}

}  // namespace fixtures
