#pragma once

#include <memory>
#include <string>
#include <thread>

#include <httplib.h>

#include "fabric/ledger.hpp"

namespace fabric {

namespace detail {

inline int status_for(const std::string& code) {
  if (code == "unknown-did") return 404;
  if (code == "already-registered") return 409;
  if (code == "stale-version") return 409;
  return 400;
}

}  // namespace detail

/// REST face of the ledger, in the Universal Resolver's shape:
///   GET  /1.0/identifiers/{did}   -> DID document JSON
///   POST /register                -> {"version":1,"timestamp":...}
///   POST /update                  -> {"version":n+1,...}
///   GET  /history/{did}           -> [entry...]
class HttpLedgerServer {
 public:
  HttpLedgerServer(std::shared_ptr<Ledger> ledger, int port = 0,
                   std::filesystem::path journal = {})
      : ledger_(std::move(ledger)), journal_(std::move(journal)) {
    server_.Get("/1.0/identifiers/:did", [this](const httplib::Request& req,
                                                httplib::Response& res) {
      handle(res, [&] { return ledger_->resolve(parse_did(req.path_params.at("did"))).to_json(); });
    });
    server_.Get("/history/:did", [this](const httplib::Request& req,
                                        httplib::Response& res) {
      handle(res, [&] {
        Json out = Json::array();
        for (const auto& e : ledger_->history(parse_did(req.path_params.at("did"))))
          out.push_back(e.to_json());
        return out;
      });
    });
    server_.Post("/register", [this](const httplib::Request& req,
                                     httplib::Response& res) {
      handle(res, [&] {
        Json body = parse_body(req);
        auto receipt =
            ledger_->register_did(DidDocument::from_json(body.at("document")),
                                  body.at("signature").get<std::string>());
        checkpoint();
        return Json{{"version", receipt.version}, {"timestamp", receipt.timestamp}};
      });
    });
    server_.Post("/update", [this](const httplib::Request& req,
                                   httplib::Response& res) {
      handle(res, [&] {
        Json body = parse_body(req);
        std::optional<std::uint64_t> expected;
        if (body.contains("expected_version"))
          expected = body["expected_version"].get<std::uint64_t>();
        auto receipt = ledger_->update_did_doc(
            parse_did(body.at("did").get<std::string>()),
            DidDocument::from_json(body.at("document")),
            body.at("signature").get<std::string>(), expected);
        checkpoint();
        return Json{{"version", receipt.version}, {"timestamp", receipt.timestamp}};
      });
    });
    if (port == 0) {
      port_ = server_.bind_to_any_port("127.0.0.1");
    } else {
      if (!server_.bind_to_port("127.0.0.1", port))
        throw Error("bind-error", "cannot bind port " + std::to_string(port));
      port_ = port;
    }
    if (port_ <= 0) throw Error("bind-error", "cannot bind a listening port");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~HttpLedgerServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  HttpLedgerServer(const HttpLedgerServer&) = delete;
  HttpLedgerServer& operator=(const HttpLedgerServer&) = delete;

  int port() const { return port_; }
  std::string endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port_);
  }
  Ledger& ledger() { return *ledger_; }

  /// Blocks until the server stops (foreground serving from the CLI).
  void wait() {
    if (thread_.joinable()) thread_.join();
  }

 private:
  void checkpoint() {
    if (!journal_.empty()) ledger_->save_journal(journal_);
  }

  static Json parse_body(const httplib::Request& req) {
    Json j = Json::parse(req.body, nullptr, false);
    if (j.is_discarded()) throw Error("malformed-request", "body is not JSON");
    return j;
  }

  template <typename Fn>
  void handle(httplib::Response& res, Fn&& fn) {
    try {
      res.set_content(fn().dump(), "application/json");
    } catch (const Error& e) {
      res.status = detail::status_for(e.code());
      res.set_content(Json{{"error", e.code()}, {"message", e.what()}}.dump(),
                      "application/json");
    } catch (const Json::exception& e) {
      res.status = 400;
      res.set_content(Json{{"error", "malformed-request"}, {"message", e.what()}}.dump(),
                      "application/json");
    }
  }

  std::shared_ptr<Ledger> ledger_;
  std::filesystem::path journal_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

/// Ledger access over the REST interface; satisfies the same port the
/// in-process ledger does, so deployment and resolvers work unchanged.
class HttpLedgerClient : public LedgerPort {
 public:
  explicit HttpLedgerClient(std::string endpoint, int timeout_ms = 5000)
      : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {}

  std::optional<DidDocument> read_head(const Did& did) override {
    auto result = client().Get("/1.0/identifiers/" + did.str());
    if (!result) throw Error("ledger-unavailable", endpoint_);
    if (result->status == 404) return std::nullopt;
    return DidDocument::from_json(parse(result->body));
  }

  LedgerReceipt register_did(const DidDocument& document,
                             const std::string& signature_compact) override {
    return receipt(post("/register", Json{{"document", document.to_json()},
                                          {"signature", signature_compact}}));
  }

  LedgerReceipt update_did_doc(const Did& did, const DidDocument& new_document,
                               const std::string& signature_compact,
                               std::optional<std::uint64_t> expected_version =
                                   std::nullopt) override {
    Json body{{"did", did.str()},
              {"document", new_document.to_json()},
              {"signature", signature_compact}};
    if (expected_version) body["expected_version"] = *expected_version;
    return receipt(post("/update", body));
  }

  std::vector<LedgerEntry> history(const Did& did) override {
    auto result = client().Get("/history/" + did.str());
    if (!result) throw Error("ledger-unavailable", endpoint_);
    Json j = parse(result->body);
    if (result->status != 200)
      throw Error(j.value("error", "ledger-error"), j.value("message", ""));
    std::vector<LedgerEntry> out;
    for (const auto& e : j) out.push_back(LedgerEntry::from_json(e));
    return out;
  }

 private:
  httplib::Client client() const {
    httplib::Client c(endpoint_);
    c.set_connection_timeout(0, timeout_ms_ * 1000);
    return c;
  }

  static Json parse(const std::string& body) {
    Json j = Json::parse(body, nullptr, false);
    if (j.is_discarded())
      throw Error("transport-malformed-response", "ledger reply is not JSON");
    return j;
  }

  Json post(const std::string& path, const Json& body) {
    auto result = client().Post(path, body.dump(), "application/json");
    if (!result) throw Error("ledger-unavailable", endpoint_);
    Json j = parse(result->body);
    if (result->status != 200)
      throw Error(j.value("error", "ledger-error"), j.value("message", ""));
    return j;
  }

  static LedgerReceipt receipt(const Json& j) {
    return LedgerReceipt{j.value("version", 0ull), j.value("timestamp", 0ull)};
  }

  std::string endpoint_;
  int timeout_ms_;
};

}  // namespace fabric
