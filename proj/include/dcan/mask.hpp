#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcan {

struct BinaryMask {
    int width = 0, height = 0;
    std::vector<std::uint8_t> bits;  // row-major, values 0/1

    BinaryMask() = default;
    BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

    std::uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

    bool operator==(const BinaryMask& o) const = default;
};

// Grid of non-negative integer labels; 0 is background, each positive value
// labels exactly one object.
struct InstanceMask {
    int width = 0, height = 0;
    std::vector<std::int32_t> labels;

    InstanceMask() = default;
    InstanceMask(int w, int h) : width(w), height(h), labels(static_cast<std::size_t>(w) * h, 0) {}

    std::int32_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
    std::int32_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

    std::int32_t max_label() const {
        std::int32_t m = 0;
        for (std::int32_t v : labels)
            if (v > m) m = v;
        return m;
    }

    BinaryMask foreground() const {
        BinaryMask m(width, height);
        for (std::size_t i = 0; i < labels.size(); ++i) m.bits[i] = labels[i] > 0 ? 1 : 0;
        return m;
    }

    bool operator==(const InstanceMask& o) const = default;
};

inline void require_same_dims(int w1, int h1, int w2, int h2, const char* what) {
    if (w1 != w2 || h1 != h2)
        throw std::invalid_argument(std::string(what) + ": dimension mismatch " +
                                    std::to_string(w1) + "x" + std::to_string(h1) + " vs " +
                                    std::to_string(w2) + "x" + std::to_string(h2));
}

}  // namespace dcan
