#pragma once

#include <cmath>
#include <nlohmann/json.hpp>

#include "fabric/bytes.hpp"
#include "fabric/error.hpp"

namespace fabric {

using Json = nlohmann::json;

namespace detail {

inline void check_canonicalizable(const Json& value) {
  switch (value.type()) {
    case Json::value_t::number_float: {
      double d = value.get<double>();
      if (!std::isfinite(d))
        throw Error("non-canonicalizable", "NaN/Infinity has no JSON form");
      return;
    }
    case Json::value_t::binary:
    case Json::value_t::discarded:
      throw Error("non-canonicalizable", "not a JSON value");
    case Json::value_t::object:
    case Json::value_t::array:
      for (const auto& item : value) check_canonicalizable(item);
      return;
    default:
      return;
  }
}

}  // namespace detail

/// Deterministic byte serialization of a JSON document: object keys sorted by
/// code point, no insignificant whitespace, minimal string escaping, integers
/// without exponent. Both ends of every protocol use this same rule, so the
/// output doubles as the signing payload for all proofs.
///
/// nlohmann::json already stores object members key-sorted (std::map over
/// UTF-8 byte order, which equals code-point order) and dump() emits the
/// compact minimally-escaped form, so serialization reduces to a
/// finiteness/value check plus dump().
inline Bytes canonicalize(const Json& document) {
  detail::check_canonicalizable(document);
  return to_bytes(document.dump());
}

inline std::string canonicalize_str(const Json& document) {
  detail::check_canonicalizable(document);
  return document.dump();
}

}  // namespace fabric
