#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace latprobe::util {

std::string read_file(const std::filesystem::path& path);

/// Writes to `<path>.tmp` and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

std::string hex64(std::uint64_t v);

}  // namespace latprobe::util
