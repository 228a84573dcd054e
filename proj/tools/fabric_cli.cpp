// fabric — scenario runner and utility CLI for the agent identity fabric.
//
// Exit codes: 0 success, 1 scenario/verification failure, 2 setup error.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "fabric/harness.hpp"

namespace {

fabric::Bytes seed_from_hex(const std::string& hex) {
  fabric::Bytes seed = fabric::from_hex(hex);
  if (seed.size() != fabric::kSeedSize)
    throw fabric::Error("bad-config", "seed must be 32 octets (64 hex chars)");
  return seed;
}

fabric::Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw fabric::Error("bad-config", "cannot open " + path);
  fabric::Json j = fabric::Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw fabric::Error("bad-config", path + " is not JSON");
  return j;
}

int default_runs(const std::string& scenario) {
  if (scenario.starts_with("intra-attest")) return 100;
  if (scenario == "cross-auth") return 10;
  return 10;
}

int cmd_keygen(const std::string& seed_hex) {
  fabric::KeyPair keys = fabric::generate_keypair(seed_from_hex(seed_hex));
  auto [did, doc] = fabric::new_self_certified_document(keys);
  fabric::Json out{{"seed", fabric::to_hex(keys.seed)},
                   {"key_id", keys.key_id},
                   {"public_key_multibase", fabric::multibase_encode_key(keys.public_key)},
                   {"did", did.str()},
                   {"document", doc.to_json()}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_ledger_serve(int port, const std::string& journal) {
  auto ledger = std::filesystem::exists(journal)
                    ? fabric::Ledger::load_journal(journal)
                    : std::make_shared<fabric::Ledger>();
  fabric::HttpLedgerServer server(ledger, port, journal);
  std::cout << "ledger serving at " << server.endpoint() << " (journal: " << journal
            << ", entries: " << ledger->size() << ")\n";
  server.wait();
  return 0;
}

int cmd_domain_deploy(const std::string& config_path, const std::string& ledger_url,
                      const std::string& wallet_dir, const std::string& out_path) {
  fabric::DomainConfig config =
      fabric::DomainConfig::from_json(read_json_file(config_path));
  std::shared_ptr<fabric::LedgerPort> ledger;
  if (!ledger_url.empty()) {
    ledger = std::make_shared<fabric::HttpLedgerClient>(ledger_url);
  } else {
    ledger = std::make_shared<fabric::Ledger>();
    std::cerr << "note: no --ledger URL given, deploying against a throwaway "
                 "in-process ledger\n";
  }
  auto domain = fabric::deploy_domain(config, ledger, wallet_dir);
  fabric::Json manifest = domain->provisioning_manifest();
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << manifest.dump(2) << "\n";
  }
  std::cout << manifest.dump(2) << "\n";
  return 0;
}

int cmd_run(const std::string& name, int runs, const std::string& seed_hex,
            const std::string& transport, const std::string& report_path) {
  fabric::Scenario scenario;
  scenario.name = name;
  scenario.runs = runs > 0 ? runs : default_runs(name);
  scenario.seed = seed_from_hex(seed_hex);
  scenario.transport = transport;

  fabric::RunReport report = fabric::run_scenario(scenario);
  fabric::Json report_json = report.to_json();
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    if (!out) throw fabric::Error("bad-config", "cannot write " + report_path);
    out << report_json.dump(2) << "\n";
  }

  const fabric::Json& agg = report_json["aggregates"];
  std::cout << "scenario " << scenario.name << " (" << scenario.runs << " runs, "
            << scenario.transport << "): completion_rate "
            << agg["completion_rate"].get<double>() << ", mean messages "
            << agg["mean_messages"].get<double>() << ", mean time "
            << agg["mean_time_ms"].get<double>() << " ms";
  if (agg.contains("defense_rate"))
    std::cout << ", defense_rate " << agg["defense_rate"].get<double>()
              << " (expected failure: "
              << agg["expected_failure_reason"].get<std::string>() << ")";
  std::cout << "\n";

  bool ok = scenario.adversarial()
                ? report.defense_rate == 1.0
                : report.completion_rate == 1.0;
  return ok ? 0 : 1;
}

int cmd_vc_verify(const std::string& vc_path, const std::string& registry_path,
                  const std::string& resolver_url,
                  const std::vector<std::string>& local_docs) {
  fabric::VerifiableCredential vc =
      fabric::VerifiableCredential::from_json(read_json_file(vc_path));
  fabric::TrustRegistry registry =
      fabric::TrustRegistry::from_json(read_json_file(registry_path));
  std::map<std::string, fabric::DidDocument> locals;
  for (const auto& path : local_docs) {
    fabric::DidDocument doc = fabric::DidDocument::from_json(read_json_file(path));
    locals.emplace(doc.id.str(), doc);
  }
  std::shared_ptr<fabric::LedgerReader> reader;
  if (!resolver_url.empty())
    reader = std::make_shared<fabric::HttpLedgerClient>(resolver_url);
  fabric::Resolver resolver(std::move(locals), reader);
  fabric::Verdict verdict = fabric::verify_credential(vc, resolver, registry);
  std::cout << fabric::Json{{"accepted", verdict.ok}, {"reason", verdict.reason}}
                   .dump(2)
            << "\n";
  return verdict.ok ? 0 : 1;
}

int cmd_resolve(const std::string& did_str, const std::string& resolver_url) {
  fabric::Did did = fabric::parse_did(did_str);
  fabric::HttpLedgerClient client(resolver_url);
  auto doc = client.read_head(did);
  if (!doc) {
    std::cerr << "unresolvable: " << did.str() << "\n";
    return 1;
  }
  std::cout << doc->to_json().dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agent identity fabric: DIDs, verifiable credentials, and "
               "deterministic mutual-authentication protocols"};
  app.require_subcommand(1);

  std::string seed_hex(64, '0');

  auto* keygen = app.add_subcommand("keygen", "derive an Ed25519 keypair and DID");
  keygen->add_option("--seed", seed_hex, "32-octet seed, hex")->required();

  auto* ledger = app.add_subcommand("ledger", "ledger operations");
  auto* serve = ledger->add_subcommand("serve", "run the REST ledger");
  int port = 8720;
  std::string journal = "ledger.journal";
  serve->add_option("--port", port, "listen port");
  serve->add_option("--journal", journal, "newline-delimited JSON journal file");

  auto* domain = app.add_subcommand("domain", "security-domain operations");
  auto* deploy = domain->add_subcommand("deploy", "deploy a domain from a config");
  std::string config_path, ledger_url, wallet_dir, manifest_out;
  deploy->add_option("--config", config_path, "DomainConfig JSON file")->required();
  deploy->add_option("--ledger", ledger_url, "ledger REST endpoint");
  deploy->add_option("--wallets", wallet_dir, "directory for agent wallets");
  deploy->add_option("--out", manifest_out, "write provisioning manifest here");

  auto* run = app.add_subcommand("run", "run a scenario and report metrics");
  std::string scenario_name, transport = "inproc", report_path;
  int runs = 0;
  run->add_option("--scenario", scenario_name, "scenario name")
      ->required()
      ->check(CLI::IsMember(std::vector<std::string>(
          fabric::scenario_names().begin(), fabric::scenario_names().end())));
  run->add_option("--runs", runs, "run count (default mirrors the scenario)");
  run->add_option("--seed", seed_hex, "32-octet scenario seed, hex");
  run->add_option("--transport", transport, "inproc | http")
      ->check(CLI::IsMember({"inproc", "http"}));
  run->add_option("--report", report_path, "write the JSON report here");

  auto* vc = app.add_subcommand("vc", "credential operations");
  auto* vc_verify = vc->add_subcommand("verify", "verify a credential file");
  std::string vc_path, registry_path, resolver_url;
  std::vector<std::string> local_docs;
  vc_verify->add_option("--vc", vc_path, "credential JSON file")->required();
  vc_verify->add_option("--registry", registry_path, "trust registry JSON file")
      ->required();
  vc_verify->add_option("--resolver", resolver_url, "ledger REST endpoint");
  vc_verify->add_option("--local-doc", local_docs,
                        "off-ledger DID document JSON file (repeatable)");

  auto* resolve = app.add_subcommand("resolve", "resolve a DID to its document");
  std::string did_str;
  resolve->add_option("did", did_str, "DID to resolve")->required();
  resolve->add_option("--resolver", resolver_url, "ledger REST endpoint")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*keygen) return cmd_keygen(seed_hex);
    if (*serve) return cmd_ledger_serve(port, journal);
    if (*deploy)
      return cmd_domain_deploy(config_path, ledger_url, wallet_dir, manifest_out);
    if (*run) return cmd_run(scenario_name, runs, seed_hex, transport, report_path);
    if (*vc_verify)
      return cmd_vc_verify(vc_path, registry_path, resolver_url, local_docs);
    if (*resolve) return cmd_resolve(did_str, resolver_url);
  } catch (const fabric::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
