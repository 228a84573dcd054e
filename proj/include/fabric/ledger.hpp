#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "fabric/crypto.hpp"
#include "fabric/did.hpp"
#include "fabric/resolver.hpp"

namespace fabric {

struct LedgerEntry {
  Did did;
  std::uint64_t version = 1;
  DidDocument document;
  std::string registered_by_signature;  // detached JWS compact form
  std::uint64_t timestamp = 0;          // logical write counter

  bool operator==(const LedgerEntry&) const = default;

  Json to_json() const {
    return Json{{"did", did.str()},
                {"version", version},
                {"document", document.to_json()},
                {"registered_by_signature", registered_by_signature},
                {"timestamp", timestamp}};
  }

  static LedgerEntry from_json(const Json& j) {
    LedgerEntry e;
    e.did = parse_did(j.at("did").get<std::string>());
    e.version = j.at("version").get<std::uint64_t>();
    e.document = DidDocument::from_json(j.at("document"));
    e.registered_by_signature = j.at("registered_by_signature").get<std::string>();
    e.timestamp = j.at("timestamp").get<std::uint64_t>();
    return e;
  }
};

struct LedgerReceipt {
  std::uint64_t version;
  std::uint64_t timestamp;
};

/// Read/write ledger surface; backed in-process or by the REST client.
class LedgerPort : public LedgerReader {
 public:
  virtual LedgerReceipt register_did(const DidDocument& document,
                                     const std::string& signature_compact) = 0;
  virtual LedgerReceipt update_did_doc(
      const Did& did, const DidDocument& new_document,
      const std::string& signature_compact,
      std::optional<std::uint64_t> expected_version) = 0;
  virtual std::vector<LedgerEntry> history(const Did& did) = 0;
};

/// Single-node simulation of the jointly operated DID ledger: append-only
/// entries, self-certifying registration, controller-authorized updates,
/// open reads. Writes are serialized by an exclusive lock; reads proceed
/// concurrently and observe only committed entries.
class Ledger : public LedgerPort {
 public:
  Ledger() = default;

  LedgerReceipt register_did(const DidDocument& document,
                             const std::string& signature_compact) override {
    document.validate();
    std::unique_lock lock(mutex_);
    if (head_index_.contains(document.id.str()))
      throw Error("already-registered", document.id.str());
    Bytes key = document.first_authentication_key();
    if (document.id.msid != self_certifying_msid(key))
      throw Error("self-certification-mismatch",
                  "document id does not commit to the first authentication key");
    if (!verify_detached_compact(canonicalize(document.to_json()),
                                 signature_compact, key))
      throw Error("bad-signature", "registration not signed by the anchored key");
    return append(document.id, 1, document, signature_compact);
  }

  LedgerReceipt update_did_doc(const Did& did, const DidDocument& new_document,
                               const std::string& signature_compact,
                               std::optional<std::uint64_t> expected_version =
                                   std::nullopt) override {
    new_document.validate();
    if (new_document.id != did)
      throw Error("malformed-document", "update document id mismatch");
    std::unique_lock lock(mutex_);
    auto it = head_index_.find(did.str());
    if (it == head_index_.end()) throw Error("unknown-did", did.str());
    const LedgerEntry& head = entries_[it->second];
    if (expected_version && *expected_version != head.version)
      throw Error("stale-version",
                  "expected v" + std::to_string(*expected_version) + ", head is v" +
                      std::to_string(head.version));
    // the old document authorizes the transition to the new one
    Bytes payload = canonicalize(new_document.to_json());
    bool authorized = false;
    for (const auto& key_id : head.document.authentication) {
      auto pk = head.document.authentication_key(key_id);
      if (pk && verify_detached_compact(payload, signature_compact, *pk)) {
        authorized = true;
        break;
      }
    }
    if (!authorized)
      throw Error("bad-signature",
                  "update not signed by a current authentication key");
    return append(did, head.version + 1, new_document, signature_compact);
  }

  DidDocument resolve(const Did& did) const {
    std::shared_lock lock(mutex_);
    auto it = head_index_.find(did.str());
    if (it == head_index_.end()) throw Error("unknown-did", did.str());
    return entries_[it->second].document;
  }

  std::optional<DidDocument> read_head(const Did& did) override {
    std::shared_lock lock(mutex_);
    auto it = head_index_.find(did.str());
    if (it == head_index_.end()) return std::nullopt;
    return entries_[it->second].document;
  }

  std::vector<LedgerEntry> history(const Did& did) override {
    std::shared_lock lock(mutex_);
    if (!head_index_.contains(did.str())) throw Error("unknown-did", did.str());
    std::vector<LedgerEntry> out;
    for (const auto& e : entries_)
      if (e.did == did) out.push_back(e);
    return out;
  }

  std::vector<LedgerEntry> all_entries() const {
    std::shared_lock lock(mutex_);
    return entries_;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
  }

  // Journal: newline-delimited JSON, one committed entry per line, in commit
  // order. Replayable by construction.
  void save_journal(const std::filesystem::path& path) const {
    std::shared_lock lock(mutex_);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("unwritable", path.string());
    for (const auto& e : entries_) out << canonicalize_str(e.to_json()) << "\n";
  }

  static std::shared_ptr<Ledger> load_journal(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("corrupt-store", "cannot open journal " + path.string());
    auto ledger = std::make_shared<Ledger>();
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      Json j = Json::parse(line, nullptr, false);
      if (j.is_discarded())
        throw Error("corrupt-store", "journal line is not JSON");
      LedgerEntry e = LedgerEntry::from_json(j);
      std::uint64_t expected =
          ledger->head_index_.contains(e.did.str())
              ? ledger->entries_[ledger->head_index_[e.did.str()]].version + 1
              : 1;
      if (e.version != expected)
        throw Error("corrupt-store", "journal version gap for " + e.did.str());
      ledger->head_index_[e.did.str()] = ledger->entries_.size();
      ledger->entries_.push_back(std::move(e));
      ledger->write_counter_ =
          std::max(ledger->write_counter_, ledger->entries_.back().timestamp);
    }
    return ledger;
  }

 private:
  LedgerReceipt append(const Did& did, std::uint64_t version,
                       const DidDocument& document,
                       const std::string& signature_compact) {
    LedgerEntry e{did, version, document, signature_compact, ++write_counter_};
    head_index_[did.str()] = entries_.size();
    entries_.push_back(std::move(e));
    return {version, write_counter_};
  }

  mutable std::shared_mutex mutex_;
  std::vector<LedgerEntry> entries_;
  std::map<std::string, std::size_t> head_index_;
  std::uint64_t write_counter_ = 0;
};

/// Registration/update payload signer used by deployment and the CLI.
inline std::string sign_document(const DidDocument& document, const KeyPair& key) {
  return sign_detached(canonicalize(document.to_json()), key).compact_form();
}

}  // namespace fabric
