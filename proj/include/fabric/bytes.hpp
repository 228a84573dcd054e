#pragma once

#include <sodium.h>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fabric/error.hpp"

namespace fabric {

using Bytes = std::vector<std::uint8_t>;

inline void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw Error("crypto-init", "libsodium initialization failed");
}

inline std::string to_hex(std::span<const std::uint8_t> data) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0f]);
  }
  return out;
}

inline Bytes from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) throw Error("bad-hex", "odd-length hex string");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(hex[2 * i]), lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error("bad-hex", "non-hex character");
    out[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return out;
}

// base64url without padding (RFC 4648 §5).
inline std::string base64url_encode(std::span<const std::uint8_t> data) {
  static const char* tbl =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= data.size(); i += 3) {
    std::uint32_t n = data[i] << 16 | data[i + 1] << 8 | data[i + 2];
    out.push_back(tbl[n >> 18]);
    out.push_back(tbl[n >> 12 & 63]);
    out.push_back(tbl[n >> 6 & 63]);
    out.push_back(tbl[n & 63]);
  }
  if (i + 1 == data.size()) {
    std::uint32_t n = data[i] << 16;
    out.push_back(tbl[n >> 18]);
    out.push_back(tbl[n >> 12 & 63]);
  } else if (i + 2 == data.size()) {
    std::uint32_t n = data[i] << 16 | data[i + 1] << 8;
    out.push_back(tbl[n >> 18]);
    out.push_back(tbl[n >> 12 & 63]);
    out.push_back(tbl[n >> 6 & 63]);
  }
  return out;
}

inline Bytes base64url_decode(std::string_view text) {
  auto val = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '-') return 62;
    if (c == '_') return 63;
    return -1;
  };
  if (text.size() % 4 == 1) throw Error("bad-base64url", "invalid length");
  Bytes out;
  out.reserve(text.size() * 3 / 4);
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : text) {
    int v = val(c);
    if (v < 0) throw Error("bad-base64url", "invalid character");
    acc = acc << 6 | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>(acc >> bits & 0xff));
    }
  }
  return out;
}

// base58btc (Bitcoin alphabet), used for method-specific identifiers and
// multibase public keys.
inline constexpr std::string_view kBase58Alphabet =
    "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz";

inline std::string base58_encode(std::span<const std::uint8_t> data) {
  std::size_t zeros = 0;
  while (zeros < data.size() && data[zeros] == 0) ++zeros;

  std::vector<std::uint8_t> digits;  // little-endian base-58
  for (std::size_t i = zeros; i < data.size(); ++i) {
    std::uint32_t carry = data[i];
    for (auto& d : digits) {
      carry += static_cast<std::uint32_t>(d) << 8;
      d = static_cast<std::uint8_t>(carry % 58);
      carry /= 58;
    }
    while (carry > 0) {
      digits.push_back(static_cast<std::uint8_t>(carry % 58));
      carry /= 58;
    }
  }
  std::string out(zeros, '1');
  for (auto it = digits.rbegin(); it != digits.rend(); ++it)
    out.push_back(kBase58Alphabet[*it]);
  return out;
}

inline bool is_base58(std::string_view s) {
  for (char c : s)
    if (kBase58Alphabet.find(c) == std::string_view::npos) return false;
  return !s.empty();
}

inline Bytes sha256(std::span<const std::uint8_t> data) {
  ensure_sodium();
  Bytes out(crypto_hash_sha256_BYTES);
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

inline Bytes sha256(std::string_view text) {
  return sha256(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline Bytes to_bytes(std::string_view text) {
  return Bytes(text.begin(), text.end());
}

inline std::string to_string(std::span<const std::uint8_t> data) {
  return std::string(data.begin(), data.end());
}

/// Counter-mode SHA-256 generator. All nonces, thread ids, and derived seeds
/// come from one of these so scenario runs replay bit-identically.
class DeterministicRng {
 public:
  explicit DeterministicRng(Bytes seed) : seed_(std::move(seed)) {}

  Bytes next(std::size_t n) {
    Bytes out;
    while (out.size() < n) {
      Bytes block = seed_;
      for (int shift = 56; shift >= 0; shift -= 8)
        block.push_back(static_cast<std::uint8_t>(counter_ >> shift & 0xff));
      ++counter_;
      Bytes digest = sha256(block);
      out.insert(out.end(), digest.begin(), digest.end());
    }
    out.resize(n);
    return out;
  }

  std::string next_uuid() {
    Bytes b = next(16);
    b[6] = static_cast<std::uint8_t>(0x40 | (b[6] & 0x0f));
    b[8] = static_cast<std::uint8_t>(0x80 | (b[8] & 0x3f));
    std::string hex = to_hex(b);
    return hex.substr(0, 8) + "-" + hex.substr(8, 4) + "-" + hex.substr(12, 4) +
           "-" + hex.substr(16, 4) + "-" + hex.substr(20);
  }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  Bytes seed_;
  std::uint64_t counter_ = 0;
};

/// Derives a child seed for a named role from a domain seed.
inline Bytes derive_seed(std::span<const std::uint8_t> parent,
                         std::string_view label) {
  Bytes input(parent.begin(), parent.end());
  input.push_back(0x00);
  input.insert(input.end(), label.begin(), label.end());
  return sha256(input);
}

/// Logical clock rendering ISO-8601 UTC timestamps from a tick counter, so
/// every timestamp in a deployment is reproducible. One tick = one second
/// past the fixed epoch.
class LogicalClock {
 public:
  explicit LogicalClock(std::uint64_t start_tick = 0) : ticks_(start_tick) {}

  std::uint64_t ticks() const noexcept { return ticks_; }
  void advance(std::uint64_t n = 1) { ticks_ += n; }

  std::string now_iso() const { return iso_from_tick(ticks_); }

  static std::string iso_from_tick(std::uint64_t tick) {
    // epoch 2030-01-01T00:00:00Z = day number 21915 since 1970-01-01
    std::uint64_t total = 21915ull * 86400ull + tick;
    std::uint64_t days = total / 86400, secs = total % 86400;
    // civil-from-days (Howard Hinnant's algorithm)
    std::int64_t z = static_cast<std::int64_t>(days) + 719468;
    std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    std::uint64_t doe = static_cast<std::uint64_t>(z - era * 146097);
    std::uint64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    std::uint64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    std::uint64_t mp = (5 * doy + 2) / 153;
    std::uint64_t d = doy - (153 * mp + 2) / 5 + 1;
    std::uint64_t m = mp < 10 ? mp + 3 : mp - 9;
    if (m <= 2) ++y;
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%04lld-%02llu-%02lluT%02llu:%02llu:%02lluZ",
                  static_cast<long long>(y), static_cast<unsigned long long>(m),
                  static_cast<unsigned long long>(d),
                  static_cast<unsigned long long>(secs / 3600),
                  static_cast<unsigned long long>(secs / 60 % 60),
                  static_cast<unsigned long long>(secs % 60));
    return buf;
  }

 private:
  std::uint64_t ticks_;
};

}  // namespace fabric
