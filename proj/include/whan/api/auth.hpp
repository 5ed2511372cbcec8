#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "whan/home/store.hpp"

namespace whan::api {

inline constexpr int kPbkdf2Iterations = 10000;
inline constexpr std::size_t kSaltBytes = 16;

/// PBKDF2-HMAC-SHA256.
wire::Bytes pbkdf2_sha256(std::string_view password, std::span<const std::uint8_t> salt, int iterations,
                          std::size_t length = 32);

/// Fresh random salt, current algorithm.
home::UserRecord make_user(std::string name, std::string_view password);
home::UserRecord make_user(std::string name, std::string_view password, wire::Bytes salt,
                           int iterations = kPbkdf2Iterations);

/// "pbkdf2-sha256:<iterations>" -> iterations.
std::optional<int> parse_algo(std::string_view tag);

/// Constant-time over the digest; false for unknown algorithm tags.
bool verify_password(const home::UserRecord& user, std::string_view password);

/// A missing record costs the same hash as a present one.
bool check_credentials(const std::optional<home::UserRecord>& record, std::string_view password);

bool authenticate(const home::Store& store, std::string_view user, std::string_view password);

/// 32 hex chars from the system CSPRNG.
std::string random_token();

}  // namespace whan::api
