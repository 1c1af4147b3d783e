#include "lkb/hash.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <string>

#include "lkb/error.hpp"

namespace lkb {

namespace {

std::string to_hex(const unsigned char* d, unsigned int len) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kDigits[d[i] >> 4]);
    out.push_back(kDigits[d[i] & 0xf]);
  }
  return out;
}

EVP_MD_CTX* ctx_of(void* p) { return static_cast<EVP_MD_CTX*>(p); }

}  // namespace

std::string sha1_hex(std::span<const unsigned char> bytes) {
  StreamHasher h;
  h.add(std::string_view(reinterpret_cast<const char*>(bytes.data()),
                         bytes.size()));
  return h.hex();
}

std::string git_blob_hash(std::string_view content) {
  StreamHasher h;
  const std::string header = "blob " + std::to_string(content.size());
  h.add(std::string_view(header.c_str(), header.size() + 1));  // keeps the NUL
  h.add(content);
  return h.hex();
}

StreamHasher::StreamHasher() : ctx_(EVP_MD_CTX_new()) {
  if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_of(ctx_), EVP_sha1(), nullptr) != 1) {
    throw Error("failed to initialise SHA-1 context");
  }
}

StreamHasher::~StreamHasher() { EVP_MD_CTX_free(ctx_of(ctx_)); }

void StreamHasher::add(double v) {
  // Little-endian IEEE bytes, independent of host order.
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  EVP_DigestUpdate(ctx_of(ctx_), b.data(), b.size());
}

void StreamHasher::add(long long v) {
  const auto bits = static_cast<std::uint64_t>(v);
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  EVP_DigestUpdate(ctx_of(ctx_), b.data(), b.size());
}

void StreamHasher::add(std::string_view bytes) {
  EVP_DigestUpdate(ctx_of(ctx_), bytes.data(), bytes.size());
}

std::string StreamHasher::hex() {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx_of(ctx_), md.data(), &len);
  return to_hex(md.data(), len);
}

}  // namespace lkb
