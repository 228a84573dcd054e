#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "fabric/did.hpp"

namespace fabric {

/// Read side of the ledger, satisfied by the in-process Ledger and by the
/// REST client alike.
class LedgerReader {
 public:
  virtual ~LedgerReader() = default;
  virtual std::optional<DidDocument> read_head(const Did& did) = 0;
};

/// Serializable resolver configuration. local_documents carries the
/// domain-distributed orchestrator document(s); everything else resolves
/// through the ledger.
struct ResolverConfig {
  std::string ledger_endpoint;
  std::map<std::string, DidDocument> local_documents;  // key: did string
  std::uint64_t cache_ttl = 0;                         // logical ticks

  Json to_json() const {
    Json docs = Json::object();
    for (const auto& [did, doc] : local_documents) docs[did] = doc.to_json();
    return Json{{"ledger_endpoint", ledger_endpoint},
                {"local_documents", docs},
                {"cache_ttl", cache_ttl}};
  }

  static ResolverConfig from_json(const Json& j) {
    ResolverConfig cfg;
    cfg.ledger_endpoint = j.value("ledger_endpoint", "");
    if (j.contains("local_documents"))
      for (const auto& [did, doc] : j["local_documents"].items())
        cfg.local_documents.emplace(did, DidDocument::from_json(doc));
    cfg.cache_ttl = j.value("cache_ttl", 0ull);
    return cfg;
  }
};

struct ResolverStats {
  std::atomic<std::uint64_t> ledger_reads{0};
};

/// Unifies ledger-anchored DIDs with off-ledger documents distributed inside
/// a domain. Local documents take precedence; ledger results are cached for
/// cache_ttl logical ticks (ttl 0 re-resolves every time). Lookups are safe
/// under concurrent use; reads within the ttl may be stale by design.
class Resolver {
 public:
  Resolver(std::map<std::string, DidDocument> local_documents,
           std::shared_ptr<LedgerReader> ledger, std::uint64_t cache_ttl = 0,
           const LogicalClock* clock = nullptr,
           std::shared_ptr<ResolverStats> stats = nullptr)
      : local_documents_(std::move(local_documents)),
        ledger_(std::move(ledger)),
        cache_ttl_(cache_ttl),
        clock_(clock),
        stats_(std::move(stats)) {}

  std::optional<DidDocument> try_resolve(const Did& did) {
    if (auto it = local_documents_.find(did.str()); it != local_documents_.end())
      return it->second;
    if (!ledger_) return std::nullopt;
    std::uint64_t now = clock_ ? clock_->ticks() : 0;
    if (cache_ttl_ > 0) {
      std::lock_guard lock(cache_mutex_);
      auto it = cache_.find(did.str());
      if (it != cache_.end() && now < it->second.second) return it->second.first;
    }
    auto doc = ledger_->read_head(did);
    if (stats_) stats_->ledger_reads.fetch_add(1, std::memory_order_relaxed);
    if (doc && cache_ttl_ > 0) {
      std::lock_guard lock(cache_mutex_);
      cache_[did.str()] = {*doc, now + cache_ttl_};
    }
    return doc;
  }

  DidDocument resolve_any(const Did& did) {
    auto doc = try_resolve(did);
    if (!doc)
      throw Error("unresolvable", did.str() + " is neither local nor on the ledger");
    return *doc;
  }

  const std::map<std::string, DidDocument>& local_documents() const {
    return local_documents_;
  }

 private:
  std::map<std::string, DidDocument> local_documents_;
  std::shared_ptr<LedgerReader> ledger_;
  std::uint64_t cache_ttl_;
  const LogicalClock* clock_;
  std::shared_ptr<ResolverStats> stats_;
  std::mutex cache_mutex_;
  std::map<std::string, std::pair<DidDocument, std::uint64_t>> cache_;
};

}  // namespace fabric
