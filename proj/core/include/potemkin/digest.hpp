#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace potemkin {

/// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

/// Lowercase hex SHA-256 of a file's contents.
std::string sha256_file_hex(const std::filesystem::path& path);

}  // namespace potemkin
