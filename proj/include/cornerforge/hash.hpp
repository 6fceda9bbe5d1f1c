#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace cornerforge {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// Hash over (relative path, file hash) of every regular file under root,
/// in sorted path order.
std::string sha256_tree(const std::filesystem::path& root);

}  // namespace cornerforge
