#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace mhqg {

// SHA-256 hex digest of a byte string / of a file's contents.
std::string sha256_hex(std::string_view data);
std::string sha256_file_hex(const std::filesystem::path& path);

}  // namespace mhqg
