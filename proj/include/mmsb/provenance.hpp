#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace mmsb {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& file);

/// Hash of the concatenated per-file digests, in the given order.
std::string sha256_files(std::span<const std::filesystem::path> files);

}  // namespace mmsb
