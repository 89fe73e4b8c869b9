#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <unistd.h>

#include <gtest/gtest.h>

#include "vsens/math.hpp"

namespace vsens::test {

inline std::filesystem::path data_path(const std::string& rel) {
    return std::filesystem::path(VSENS_TEST_DATA_DIR) / rel;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void expect_near(const Vec3& a, const Vec3& b, double tol) {
    EXPECT_NEAR(a.x, b.x, tol);
    EXPECT_NEAR(a.y, b.y, tol);
    EXPECT_NEAR(a.z, b.z, tol);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("vsens_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Entries of a stored (uncompressed) zip, read through the central directory.
inline std::map<std::string, std::string> read_stored_zip(const std::string& bytes) {
    auto u16 = [&](std::size_t at) {
        return static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes.at(at)) |
                                          static_cast<std::uint8_t>(bytes.at(at + 1)) << 8);
    };
    auto u32 = [&](std::size_t at) { return u16(at) | u16(at + 2) << 16; };
    std::map<std::string, std::string> out;
    if (bytes.size() < 22) return out;
    const std::size_t eocd = bytes.size() - 22;
    if (u32(eocd) != 0x06054b50u) return out;
    std::size_t cd = u32(eocd + 16);
    for (std::uint32_t i = 0; i < u16(eocd + 10); ++i) {
        const std::uint32_t size = u32(cd + 20);
        const std::uint32_t name_len = u16(cd + 28);
        const std::uint32_t local = u32(cd + 42);
        const std::size_t data = local + 30 + u16(local + 26) + u16(local + 28);
        out[bytes.substr(cd + 46, name_len)] = bytes.substr(data, size);
        cd += 46 + name_len + u16(cd + 30) + u16(cd + 32);
    }
    return out;
}

}  // namespace vsens::test
