#include <catch2/catch_amalgamated.hpp>

#include "support/model_check.hpp"

TEST_CASE("no interleaving reaches authentication or issuance one-sided",
          "[model-check]") {
  // shallower bound in the unit suite; the acceptance suite runs depth 12
  modelcheck::Result result = modelcheck::explore(7);
  CAPTURE(result.nodes_explored, result.transitions, result.deepest);
  for (const auto& v : result.violations) UNSCOPED_INFO(v);
  CHECK(result.violations.empty());
  CHECK_FALSE(result.budget_exhausted);
  CHECK(result.nodes_explored > 100);  // the exploration actually branched
}

TEST_CASE("some explored trace completes the attestation", "[model-check]") {
  modelcheck::Result result = modelcheck::explore(9);
  CHECK(result.requester_completed);
  CHECK(result.violations.empty());
}
