#include "vsens/format.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace vsens {

std::string format_shortest(double value) {
    if (value == 0.0) {
        value = 0.0;  // no "-0"
    }
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc()) {
        return "nan";
    }
    return std::string(buf.data(), ptr);
}

double quantize_significant(double value, int digits) {
    if (!std::isfinite(value) || value == 0.0) {
        return value == 0.0 ? 0.0 : value;
    }
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                         std::chars_format::scientific, digits - 1);
    if (ec != std::errc()) {
        return value;
    }
    double out = 0.0;
    std::from_chars(buf.data(), ptr, out);
    return out == 0.0 ? 0.0 : out;
}

std::optional<double> parse_double(std::string_view text) {
    if (!text.empty() && text.front() == '+') {
        text.remove_prefix(1);
    }
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        return std::nullopt;
    }
    return out;
}

}  // namespace vsens
