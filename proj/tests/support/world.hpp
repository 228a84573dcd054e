#pragma once

// Minimal deployed world for credential/presentation tests: a shared ledger,
// an off-ledger orchestrator, a ledger-anchored issuer agent and holder
// agent, and the intra-domain trust wiring.

#include <memory>

#include "fabric/credentials.hpp"
#include "fabric/ledger.hpp"
#include "fabric/presentation.hpp"
#include "support/fixtures.hpp"

namespace testworld {

using namespace fabric;

struct World {
  std::shared_ptr<Ledger> ledger = std::make_shared<Ledger>();
  LogicalClock clock;

  KeyPair orch_keys = generate_keypair(fixtures::fixed_seed(0x10));
  Did orch_did;
  DidDocument orch_doc;

  KeyPair issuer_keys = generate_keypair(fixtures::fixed_seed(0x20));
  Did issuer_did;
  DidDocument issuer_doc;

  KeyPair holder_keys = generate_keypair(fixtures::fixed_seed(0x30));
  Did holder_did;
  DidDocument holder_doc;

  KeyPair verifier_keys = generate_keypair(fixtures::fixed_seed(0x40));
  Did verifier_did;
  DidDocument verifier_doc;

  TrustRegistry registry;  // intra: orchestrator (basic+rich), issuer (rich)

  World() {
    std::tie(orch_did, orch_doc) = new_org_document(orch_keys);
    std::tie(issuer_did, issuer_doc) = new_self_certified_document(issuer_keys);
    std::tie(holder_did, holder_doc) = new_self_certified_document(holder_keys);
    std::tie(verifier_did, verifier_doc) =
        new_self_certified_document(verifier_keys);
    ledger->register_did(issuer_doc, sign_document(issuer_doc, issuer_keys));
    ledger->register_did(holder_doc, sign_document(holder_doc, holder_keys));
    ledger->register_did(verifier_doc, sign_document(verifier_doc, verifier_keys));

    registry.scope = "intra";
    registry.trusted_issuers[orch_did.str()] = {
        {std::string(kBasicType), std::string(kRichType)}, "orchestrator"};
    registry.trusted_issuers[issuer_did.str()] = {{std::string(kRichType)},
                                                  "identity-issuer"};
  }

  /// Intra-domain resolver: sees the orchestrator document.
  Resolver resolver() {
    return Resolver({{orch_did.str(), orch_doc}}, ledger, 0, &clock);
  }

  /// Foreign-domain resolver: same ledger, no orchestrator document.
  Resolver foreign_resolver() { return Resolver({}, ledger, 0, &clock); }

  VerifiableCredential bvc(const Did& subject) {
    return issue_credential(orch_keys, orch_did, subject,
                            std::string(kBasicType), Json{{"agent", true}},
                            clock.now_iso());
  }

  VerifiableCredential rvc(const Did& subject,
                           Json claims = Json{
                               {"role", "travel-booking"},
                               {"capabilities", Json::array({"quote", "book"})}}) {
    return issue_credential(issuer_keys, issuer_did, subject,
                            std::string(kRichType), claims, clock.now_iso());
  }
};

}  // namespace testworld
