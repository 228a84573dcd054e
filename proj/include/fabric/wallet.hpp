#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fabric/credentials.hpp"
#include "fabric/presentation.hpp"

namespace fabric {

namespace detail {

inline std::string safe_name(const std::string& id) {
  Bytes digest = sha256(id);
  digest.resize(16);
  return to_hex(digest);
}

inline Json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("corrupt-store", "missing " + p.string());
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error("corrupt-store", "not JSON: " + p.string());
  return j;
}

inline void write_json_file(const std::filesystem::path& p, const Json& j) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw Error("unwritable", p.string());
  out << canonicalize_str(j) << "\n";
}

}  // namespace detail

/// Per-agent store: the DID keypair, held credentials, locally trusted DID
/// documents (the domain's orchestrator doc), and the trust registry. The
/// file system is the wallet backend; an empty root_path keeps the wallet
/// in memory only. The seed is written to key.json and nowhere else.
///
/// Layout under root_path:
///   key.json
///   credentials/<hash>.json
///   trusted_docs/<hash>.json
///   registry.json
class Wallet {
 public:
  Wallet() = default;
  Wallet(Did agent_did, KeyPair keypair, std::filesystem::path root_path = {})
      : agent_did_(std::move(agent_did)),
        keypair_(std::move(keypair)),
        root_path_(std::move(root_path)) {}

  const Did& agent_did() const { return agent_did_; }
  const KeyPair& keypair() const { return keypair_; }
  const std::vector<VerifiableCredential>& credentials() const {
    return credentials_;
  }
  const std::map<std::string, DidDocument>& local_documents() const {
    return local_documents_;
  }
  const TrustRegistry& registry() const { return registry_; }
  TrustRegistry& registry() { return registry_; }
  const std::filesystem::path& root_path() const { return root_path_; }

  bool operator==(const Wallet& other) const {
    return agent_did_ == other.agent_did_ && keypair_.seed == other.keypair_.seed &&
           keypair_.public_key == other.keypair_.public_key &&
           keypair_.key_id == other.keypair_.key_id &&
           credentials_ == other.credentials_ &&
           local_documents_ == other.local_documents_ &&
           registry_ == other.registry_;
  }

  void trust_document(const DidDocument& doc) {
    local_documents_[doc.id.str()] = doc;
    if (!root_path_.empty())
      detail::write_json_file(
          root_path_ / "trusted_docs" / (detail::safe_name(doc.id.str()) + ".json"),
          doc.to_json());
  }

  void set_registry(TrustRegistry registry) {
    registry_ = std::move(registry);
    if (!root_path_.empty())
      detail::write_json_file(root_path_ / "registry.json", registry_.to_json());
  }

  /// Stores a credential about this wallet's own DID after verifying it.
  /// Idempotent per cred_id.
  void add_credential(const VerifiableCredential& vc, Resolver& resolver) {
    if (vc.subject != agent_did_)
      throw Error("subject-mismatch",
                  "wallet holds only credentials about " + agent_did_.str());
    if (auto verdict = verify_credential(vc, resolver, registry_); !verdict)
      throw Error("unverified-credential", verdict.reason);
    store_credential(vc);
  }

  /// Deployment-time provisioning; skips the registry check (the registry may
  /// be written after the credential during bootstrap).
  void store_credential(const VerifiableCredential& vc) {
    if (vc.subject != agent_did_)
      throw Error("subject-mismatch",
                  "wallet holds only credentials about " + agent_did_.str());
    for (auto& existing : credentials_)
      if (existing.cred_id == vc.cred_id) {
        existing = vc;
        persist_credential(vc);
        return;
      }
    credentials_.push_back(vc);
    // canonical order, so save/load round-trips are identity
    std::sort(credentials_.begin(), credentials_.end(),
              [](const auto& a, const auto& b) { return a.cred_id < b.cred_id; });
    persist_credential(vc);
  }

  void remove_credential(const std::string& cred_id) {
    std::erase_if(credentials_,
                  [&](const auto& vc) { return vc.cred_id == cred_id; });
    if (!root_path_.empty())
      std::filesystem::remove(root_path_ / "credentials" /
                              (detail::safe_name(cred_id) + ".json"));
  }

  void save() const {
    if (root_path_.empty()) throw Error("unwritable", "wallet has no root path");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(root_path_ / "credentials", ec);
    fs::create_directories(root_path_ / "trusted_docs", ec);
    if (ec) throw Error("unwritable", root_path_.string());
    detail::write_json_file(root_path_ / "key.json",
                            Json{{"seed", to_hex(keypair_.seed)},
                                 {"key_id", keypair_.key_id},
                                 {"did", agent_did_.str()}});
    for (const auto& vc : credentials_) persist_credential(vc);
    for (const auto& [did, doc] : local_documents_)
      detail::write_json_file(
          root_path_ / "trusted_docs" / (detail::safe_name(did) + ".json"),
          doc.to_json());
    detail::write_json_file(root_path_ / "registry.json", registry_.to_json());
  }

  static Wallet load(const std::filesystem::path& root_path) {
    namespace fs = std::filesystem;
    Json key = detail::read_json_file(root_path / "key.json");
    Wallet w;
    try {
      w.agent_did_ = parse_did(key.at("did").get<std::string>());
      Bytes seed = from_hex(key.at("seed").get<std::string>());
      w.keypair_ = generate_keypair(seed, key.at("key_id").get<std::string>());
      w.root_path_ = root_path;
      if (fs::exists(root_path / "credentials"))
        for (const auto& f : fs::directory_iterator(root_path / "credentials"))
          w.credentials_.push_back(
              VerifiableCredential::from_json(detail::read_json_file(f.path())));
      if (fs::exists(root_path / "trusted_docs"))
        for (const auto& f : fs::directory_iterator(root_path / "trusted_docs")) {
          DidDocument doc = DidDocument::from_json(detail::read_json_file(f.path()));
          w.local_documents_[doc.id.str()] = doc;
        }
      w.registry_ =
          TrustRegistry::from_json(detail::read_json_file(root_path / "registry.json"));
    } catch (const Json::exception& e) {
      throw Error("corrupt-store", e.what());
    }
    // directory iteration order is unspecified; keep the credential list
    // deterministic
    std::sort(w.credentials_.begin(), w.credentials_.end(),
              [](const auto& a, const auto& b) { return a.cred_id < b.cred_id; });
    return w;
  }

  std::optional<VerifiableCredential> find_by_type(std::string_view type) const {
    for (const auto& vc : credentials_)
      if (vc.has_type(type)) return vc;
    return std::nullopt;
  }

 private:
  void persist_credential(const VerifiableCredential& vc) const {
    if (root_path_.empty()) return;
    detail::write_json_file(
        root_path_ / "credentials" / (detail::safe_name(vc.cred_id) + ".json"),
        vc.to_json());
  }

  Did agent_did_;
  KeyPair keypair_;
  std::vector<VerifiableCredential> credentials_;
  std::map<std::string, DidDocument> local_documents_;
  TrustRegistry registry_;
  std::filesystem::path root_path_;
};

/// Advisory single-owner lock on a wallet directory.
class WalletLock {
 public:
  explicit WalletLock(const std::filesystem::path& root) : path_(root / ".lock") {
    std::error_code ec;
    std::filesystem::create_directories(root, ec);
    if (std::filesystem::exists(path_))
      throw Error("wallet-locked", path_.string());
    std::ofstream out(path_);
    out << "locked\n";
  }
  ~WalletLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  WalletLock(const WalletLock&) = delete;
  WalletLock& operator=(const WalletLock&) = delete;

 private:
  std::filesystem::path path_;
};

inline Selection select_credentials(const Wallet& wallet,
                                    const PresentationDefinition& pd) {
  return select_credentials(wallet.credentials(), pd);
}

}  // namespace fabric
