#include <filesystem>
#include <fstream>

#include <catch2/catch_amalgamated.hpp>

#include "fabric/wallet.hpp"
#include "support/world.hpp"

using namespace fabric;
using testworld::World;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("fabric-wallet-" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Wallet fixture_wallet(World& w, const fs::path& root) {
  Wallet wallet(w.holder_did, w.holder_keys, root);
  if (!root.empty()) wallet.save();
  wallet.trust_document(w.orch_doc);
  wallet.set_registry(w.registry);
  wallet.store_credential(w.bvc(w.holder_did));
  wallet.store_credential(w.rvc(w.holder_did));
  return wallet;
}

}  // namespace

TEST_CASE("wallet save/load round trip is identity", "[wallet]") {
  World w;
  TempDir dir("roundtrip");
  Wallet wallet = fixture_wallet(w, dir.path);
  wallet.save();

  Wallet loaded = Wallet::load(dir.path);
  CHECK(loaded == wallet);
  CHECK(loaded.credentials().size() == 2);
  CHECK(loaded.local_documents().contains(w.orch_did.str()));

  SECTION("two credentials mean exactly two files") {
    std::size_t files = 0;
    for (const auto& f : fs::directory_iterator(dir.path / "credentials"))
      files += f.is_regular_file() ? 1 : 0;
    CHECK(files == 2);
  }

  SECTION("the seed lives in key.json and nowhere else") {
    std::string seed_hex = to_hex(w.holder_keys.seed);
    for (const auto& f : fs::recursive_directory_iterator(dir.path)) {
      if (!f.is_regular_file()) continue;
      std::ifstream in(f.path());
      std::string content((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
      if (f.path().filename() == "key.json") {
        CHECK(content.find(seed_hex) != std::string::npos);
      } else {
        CHECK(content.find(seed_hex) == std::string::npos);
      }
    }
  }
}

TEST_CASE("randomized wallets round trip", "[wallet]") {
  World w;
  DeterministicRng rng(fixtures::fixed_seed(0xE0));
  for (int i = 0; i < 20; ++i) {
    TempDir dir("prop-" + std::to_string(i));
    KeyPair keys = generate_keypair(rng.next(32));
    auto [did, doc] = new_self_certified_document(keys);
    Wallet wallet(did, keys, dir.path);
    wallet.save();
    wallet.trust_document(w.orch_doc);
    wallet.set_registry(w.registry);
    std::size_t vcs = rng.next(1)[0] % 4;
    for (std::size_t c = 0; c < vcs; ++c) {
      w.clock.advance();
      wallet.store_credential(
          w.rvc(did, Json{{"role", "r" + to_hex(rng.next(2))}}));
    }
    CHECK(Wallet::load(dir.path) == wallet);
  }
}

TEST_CASE("wallet load failures", "[wallet]") {
  TempDir dir("corrupt");
  SECTION("missing key.json") {
    CHECK_THROWS_MATCHES(Wallet::load(dir.path), Error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::StartsWith("corrupt-store")));
  }
  SECTION("garbled key.json") {
    std::ofstream(dir.path / "key.json") << "{not json";
    CHECK_THROWS_AS(Wallet::load(dir.path), Error);
  }
  SECTION("credential with wrong schema") {
    World w;
    Wallet wallet = fixture_wallet(w, dir.path);
    wallet.save();
    std::ofstream(dir.path / "credentials" / "bogus.json") << "{\"cred_id\":1}";
    CHECK_THROWS_AS(Wallet::load(dir.path), Error);
  }
}

TEST_CASE("add_credential guards", "[wallet]") {
  World w;
  Wallet wallet(w.holder_did, w.holder_keys);
  wallet.trust_document(w.orch_doc);
  wallet.set_registry(w.registry);
  Resolver r = w.resolver();

  SECTION("own verified credential is stored") {
    wallet.add_credential(w.rvc(w.holder_did), r);
    CHECK(wallet.credentials().size() == 1);
  }

  SECTION("credential about another subject") {
    CHECK_THROWS_MATCHES(wallet.add_credential(w.rvc(w.verifier_did), r), Error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::StartsWith("subject-mismatch")));
  }

  SECTION("credential failing verification") {
    VerifiableCredential vc = w.rvc(w.holder_did);
    vc.claims["role"] = "tampered";
    CHECK_THROWS_MATCHES(
        wallet.add_credential(vc, r), Error,
        Catch::Matchers::MessageMatches(
            Catch::Matchers::StartsWith("unverified-credential")));
  }

  SECTION("idempotent per cred_id") {
    VerifiableCredential vc = w.rvc(w.holder_did);
    wallet.add_credential(vc, r);
    wallet.add_credential(vc, r);
    CHECK(wallet.credentials().size() == 1);
  }
}

TEST_CASE("advisory wallet lock", "[wallet]") {
  TempDir dir("lock");
  {
    WalletLock lock(dir.path);
    CHECK_THROWS_MATCHES(WalletLock(dir.path), Error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::StartsWith("wallet-locked")));
  }
  CHECK_NOTHROW(WalletLock(dir.path));  // released on destruction
}
