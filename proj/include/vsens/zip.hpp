#pragma once

#include <string>
#include <utility>
#include <vector>

namespace vsens {

/// Builds an uncompressed (stored) ZIP archive in memory. Timestamps are
/// fixed at 1980-01-01 so identical inputs give identical bytes.
class ZipWriter {
public:
    void add(const std::string& name, const std::string& content);
    std::string finish() const;

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace vsens
