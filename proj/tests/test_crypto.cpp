#include <catch2/catch_amalgamated.hpp>

#include "fabric/crypto.hpp"
#include "support/fixtures.hpp"

using namespace fabric;

TEST_CASE("ed25519 reproduces the RFC 8032 test vectors", "[crypto]") {
  struct Vector {
    std::string seed, pk, msg, sig;
  };
  const Vector vectors[] = {
      {fixtures::kRfc8032Test1Seed, fixtures::kRfc8032Test1Pk,
       fixtures::kRfc8032Test1Msg, fixtures::kRfc8032Test1Sig},
      {fixtures::kRfc8032Test2Seed, fixtures::kRfc8032Test2Pk,
       fixtures::kRfc8032Test2Msg, fixtures::kRfc8032Test2Sig},
      {fixtures::kRfc8032Test3Seed, fixtures::kRfc8032Test3Pk,
       fixtures::kRfc8032Test3Msg, fixtures::kRfc8032Test3Sig},
  };
  for (const auto& v : vectors) {
    Bytes seed = from_hex(v.seed);
    Bytes msg = from_hex(v.msg);
    CHECK(to_hex(ed25519_public_key(seed)) == v.pk);
    CHECK(to_hex(ed25519_sign(msg, seed)) == v.sig);
    CHECK(ed25519_verify(msg, from_hex(v.sig), from_hex(v.pk)));
  }
}

TEST_CASE("keypair generation is deterministic in the seed", "[crypto]") {
  CHECK(to_hex(generate_keypair(fixtures::fixed_seed(0)).public_key) ==
        fixtures::kZeroSeedPk);
  CHECK(generate_keypair(fixtures::fixed_seed(7)).public_key ==
        generate_keypair(fixtures::fixed_seed(7)).public_key);
  CHECK_THROWS_MATCHES(generate_keypair(Bytes(31, 0)), Error,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::StartsWith("seed-length")));
}

TEST_CASE("detached JWS round trip and fixtures", "[crypto]") {
  KeyPair orch = generate_keypair(fixtures::seed_of(fixtures::kOrchSeed));
  Bytes payload = to_bytes(fixtures::kNestedCanonical);

  DetachedSignature sig = sign_detached(payload, orch);
  CHECK(sig.compact_form() == fixtures::kNestedDocJws);
  CHECK(verify_detached(payload, sig, orch.public_key).ok);

  SECTION("compact form has two dots and an empty payload segment") {
    std::string compact = sig.compact_form();
    auto first = compact.find('.');
    REQUIRE(first != std::string::npos);
    CHECK(compact[first + 1] == '.');
    CHECK(compact.find('.', first + 2) == std::string::npos);
    CHECK(compact.substr(0, first) == fixtures::kJwsHeaderB64);
  }

  SECTION("decoding the compact form reproduces header and signature") {
    DetachedSignature back = DetachedSignature::from_compact(sig.compact_form());
    CHECK(back.protected_header == sig.protected_header);
    CHECK(back.signature == sig.signature);
    CHECK(back.compact_form() == sig.compact_form());
  }

  SECTION("signing is deterministic") {
    CHECK(sign_detached(payload, orch).compact_form() == sig.compact_form());
  }

  SECTION("RFC 8032 TEST 2 key routed through the JWS signing input") {
    KeyPair t2 = generate_keypair(fixtures::seed_of(fixtures::kRfc8032Test2Seed));
    DetachedSignature jws = sign_detached(from_hex("72"), t2);
    CHECK(jws.compact_form() == fixtures::kRfc8032Test2Jws);
  }

  SECTION("empty payload is rejected") {
    CHECK_THROWS_AS(sign_detached(Bytes{}, orch), Error);
  }
}

TEST_CASE("detached verification rejections carry reasons", "[crypto]") {
  KeyPair key = generate_keypair(fixtures::fixed_seed(3));
  Bytes payload = to_bytes(std::string("acceptance payload"));
  DetachedSignature sig = sign_detached(payload, key);

  SECTION("flipped payload octet") {
    Bytes mutated = payload;
    mutated[4] ^= 0x01;
    CHECK(verify_detached(mutated, sig, key.public_key).reason == "bad-signature");
  }

  SECTION("header algorithm rewritten to none") {
    DetachedSignature forged = sig;
    forged.protected_header["alg"] = "none";
    CHECK(verify_detached(payload, forged, key.public_key).reason == "bad-header");
  }

  SECTION("b64 flag flipped") {
    DetachedSignature forged = sig;
    forged.protected_header["b64"] = true;
    CHECK(verify_detached(payload, forged, key.public_key).reason == "bad-header");
  }

  SECTION("wrong key") {
    KeyPair other = generate_keypair(fixtures::fixed_seed(4));
    CHECK(verify_detached(payload, sig, other.public_key).reason ==
          "bad-signature");
  }

  SECTION("malformed compact forms") {
    CHECK(verify_detached_compact(payload, "nodots", key.public_key).reason ==
          "malformed");
    CHECK(verify_detached_compact(payload, "a.b.c", key.public_key).reason ==
          "malformed");
  }
}

TEST_CASE("sign/verify inverse holds for random seeds and payloads", "[crypto]") {
  DeterministicRng rng(fixtures::fixed_seed(0x51));
  for (int i = 0; i < 64; ++i) {
    KeyPair key = generate_keypair(rng.next(32));
    Bytes payload = rng.next(1 + i * 3);
    DetachedSignature sig = sign_detached(payload, key);
    CHECK(verify_detached(payload, sig, key.public_key).ok);

    // single random bit flip must break verification
    Bytes mutated = payload;
    std::size_t bit = rng.next(1)[0] % (mutated.size() * 8);
    mutated[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    if (mutated != payload)
      CHECK_FALSE(verify_detached(mutated, sig, key.public_key).ok);
  }
}
