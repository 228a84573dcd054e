#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace fabric {

/// Error thrown on violated preconditions and failed state changes.
/// `code()` is a stable machine-readable slug (e.g. "already-registered");
/// the what() string adds human context. Verification outcomes are values,
/// not errors (see Verdict).
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Outcome of a signature/credential/presentation check. Rejections carry a
/// machine-readable reason slug; composite reasons nest as
/// "vc-rejected(untrusted-issuer)".
struct Verdict {
  bool ok = false;
  std::string reason;  // empty on accept

  static Verdict accept() { return {true, {}}; }
  static Verdict reject(std::string why) { return {false, std::move(why)}; }
  explicit operator bool() const noexcept { return ok; }
};

}  // namespace fabric
