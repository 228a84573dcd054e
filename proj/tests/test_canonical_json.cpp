#include <catch2/catch_amalgamated.hpp>

#include "fabric/canonical_json.hpp"
#include "support/fixtures.hpp"
#include "support/json_gen.hpp"

using namespace fabric;

TEST_CASE("canonical serialization basics", "[canonical]") {
  CHECK(canonicalize_str(Json::parse(R"({"b":1,"a":2})")) == R"({"a":2,"b":1})");
  CHECK(canonicalize_str(Json::object()) == "{}");
  CHECK(canonicalize_str(Json::parse("[1,2,3]")) == "[1,2,3]");
  CHECK(canonicalize_str(Json(42)) == "42");
  CHECK(canonicalize_str(Json("x")) == "\"x\"");

  SECTION("no insignificant whitespace, keys sorted at every level") {
    Json doc = Json::parse(R"({ "z" : {"b": 1, "a": [ 1 , 2 ]}, "a" : null })");
    CHECK(canonicalize_str(doc) == R"({"a":null,"z":{"a":[1,2],"b":1}})");
  }

  SECTION("integers render without exponent") {
    CHECK(canonicalize_str(Json(1000000)) == "1000000");
    CHECK(canonicalize_str(Json(-7)) == "-7");
  }

  SECTION("non-finite numbers are not canonicalizable") {
    Json bad = Json::object();
    bad["x"] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_MATCHES(canonicalize(bad), Error,
                         Catch::Matchers::MessageMatches(Catch::Matchers::StartsWith(
                             "non-canonicalizable")));
    bad["x"] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(canonicalize(bad), Error);
  }

  SECTION("binary values are not JSON") {
    Json bad = Json::binary({1, 2, 3});
    CHECK_THROWS_AS(canonicalize(bad), Error);
  }
}

TEST_CASE("nested credential fixture matches the pinned bytes", "[canonical]") {
  Json doc = Json::parse(fixtures::kNestedDocument);
  CHECK(canonicalize_str(doc) == fixtures::kNestedCanonical);
  CHECK(to_hex(sha256(canonicalize(doc))) == fixtures::kNestedCanonicalSha256);
}

TEST_CASE("canonicalization is idempotent and order-invariant", "[canonical]") {
  DeterministicRng rng(fixtures::fixed_seed(0xC4));
  for (int i = 0; i < 300; ++i) {
    Json doc = testgen::random_json(rng);
    std::string canonical = canonicalize_str(doc);

    // idempotent on its own parsed output
    CHECK(canonicalize_str(Json::parse(canonical)) == canonical);

    // invariant under member reordering
    std::string shuffled = testgen::render_shuffled(doc, rng);
    CHECK(canonicalize_str(Json::parse(shuffled)) == canonical);
  }
}
