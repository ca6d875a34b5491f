#include "mmsb/provenance.hpp"

#include <array>

#include <openssl/evp.h>

#include "mmsb/csv.hpp"
#include "mmsb/error.hpp"

namespace mmsb {

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::Io, "SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xf];
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& file) { return sha256_hex(csv::read_text(file)); }

std::string sha256_files(std::span<const std::filesystem::path> files) {
  std::string digests;
  for (const auto& f : files) digests += sha256_file(f);
  return sha256_hex(digests);
}

}  // namespace mmsb
