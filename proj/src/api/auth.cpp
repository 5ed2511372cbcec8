#include "whan/api/auth.hpp"

#include <charconv>
#include <stdexcept>

#include <fmt/format.h>
#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/rand.h>

namespace whan::api {

namespace {

wire::Bytes random_bytes(std::size_t n) {
  wire::Bytes out(n);
  if (RAND_bytes(out.data(), static_cast<int>(n)) != 1) throw std::runtime_error("RAND_bytes failed");
  return out;
}

std::string algo_tag(int iterations) { return fmt::format("pbkdf2-sha256:{}", iterations); }

}  // namespace

wire::Bytes pbkdf2_sha256(std::string_view password, std::span<const std::uint8_t> salt, int iterations,
                          std::size_t length) {
  wire::Bytes out(length);
  if (PKCS5_PBKDF2_HMAC(password.data(), static_cast<int>(password.size()), salt.data(),
                        static_cast<int>(salt.size()), iterations, EVP_sha256(), static_cast<int>(length),
                        out.data()) != 1) {
    throw std::runtime_error("PBKDF2 failed");
  }
  return out;
}

home::UserRecord make_user(std::string name, std::string_view password) {
  return make_user(std::move(name), password, random_bytes(kSaltBytes));
}

home::UserRecord make_user(std::string name, std::string_view password, wire::Bytes salt, int iterations) {
  home::UserRecord u;
  u.name = std::move(name);
  u.hash = pbkdf2_sha256(password, salt, iterations);
  u.salt = std::move(salt);
  u.algo = algo_tag(iterations);
  return u;
}

std::optional<int> parse_algo(std::string_view tag) {
  constexpr std::string_view prefix = "pbkdf2-sha256:";
  if (tag.substr(0, prefix.size()) != prefix) return std::nullopt;
  auto digits = tag.substr(prefix.size());
  int n = 0;
  auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
  if (ec != std::errc{} || p != digits.data() + digits.size() || n < 1) return std::nullopt;
  return n;
}

bool verify_password(const home::UserRecord& user, std::string_view password) {
  auto iterations = parse_algo(user.algo);
  if (!iterations || user.hash.empty()) return false;
  auto digest = pbkdf2_sha256(password, user.salt, *iterations, user.hash.size());
  return CRYPTO_memcmp(digest.data(), user.hash.data(), digest.size()) == 0;
}

bool check_credentials(const std::optional<home::UserRecord>& record, std::string_view password) {
  if (record) return verify_password(*record, password);
  static const home::UserRecord dummy = make_user("", "dummy-password");
  (void)verify_password(dummy, password);
  return false;
}

bool authenticate(const home::Store& store, std::string_view user, std::string_view password) {
  return check_credentials(store.user(user), password);
}

std::string random_token() {
  std::string out;
  for (auto b : random_bytes(16)) out += fmt::format("{:02x}", b);
  return out;
}

}  // namespace whan::api
