#include <cstdint>
#include <string>

#include <gtest/gtest.h>
#include <zlib.h>

#include "vsens/zip.hpp"

using vsens::ZipWriter;

namespace {

std::uint32_t u32(const std::string& s, std::size_t at) {
    return static_cast<std::uint8_t>(s[at]) | static_cast<std::uint8_t>(s[at + 1]) << 8 |
           static_cast<std::uint8_t>(s[at + 2]) << 16 |
           static_cast<std::uint32_t>(static_cast<std::uint8_t>(s[at + 3])) << 24;
}

std::uint16_t u16(const std::string& s, std::size_t at) {
    return static_cast<std::uint16_t>(static_cast<std::uint8_t>(s[at]) |
                                      static_cast<std::uint8_t>(s[at + 1]) << 8);
}

}  // namespace

TEST(Zip, StoredEntriesReadBack) {
    ZipWriter zip;
    zip.add("a.csv", "time,x\n0,1\n");
    zip.add("a.meta.json", "{}\n");
    const std::string bytes = zip.finish();

    const std::size_t eocd = bytes.size() - 22;
    ASSERT_EQ(u32(bytes, eocd), 0x06054b50u);
    EXPECT_EQ(u16(bytes, eocd + 10), 2);
    std::size_t cd = u32(bytes, eocd + 16);
    for (const std::string expected : {"a.csv", "a.meta.json"}) {
        ASSERT_EQ(u32(bytes, cd), 0x02014b50u);
        const std::uint32_t crc = u32(bytes, cd + 16);
        const std::uint32_t size = u32(bytes, cd + 20);
        const std::uint16_t name_len = u16(bytes, cd + 28);
        const std::uint32_t local = u32(bytes, cd + 42);
        EXPECT_EQ(bytes.substr(cd + 46, name_len), expected);

        ASSERT_EQ(u32(bytes, local), 0x04034b50u);
        const std::size_t data = local + 30 + u16(bytes, local + 26) + u16(bytes, local + 28);
        const std::string content = bytes.substr(data, size);
        EXPECT_EQ(crc, crc32(0L, reinterpret_cast<const Bytef*>(content.data()),
                             static_cast<uInt>(content.size())));
        cd += 46 + name_len;
    }
}

TEST(Zip, Deterministic) {
    ZipWriter a, b;
    a.add("x", "1");
    b.add("x", "1");
    EXPECT_EQ(a.finish(), b.finish());
}
