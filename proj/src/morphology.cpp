#include "dcan/morphology.hpp"

#include <stdexcept>

namespace dcan {

DiskElement DiskElement::make(int radius) {
    if (radius < 0) throw std::invalid_argument("disk: radius must be >= 0");
    DiskElement d;
    d.radius = radius;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            if (dy * dy + dx * dx <= radius * radius) d.offsets.emplace_back(dy, dx);
    return d;
}

namespace {

constexpr int kDx4[4] = {1, -1, 0, 0};
constexpr int kDy4[4] = {0, 0, 1, -1};

}  // namespace

InstanceMask connected_components(const BinaryMask& mask) {
    InstanceMask out(mask.width, mask.height);
    std::vector<std::size_t> stack;
    std::int32_t next = 0;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y) || out.at(x, y) != 0) continue;
            ++next;
            out.at(x, y) = next;
            stack.push_back(static_cast<std::size_t>(y) * mask.width + x);
            while (!stack.empty()) {
                const std::size_t p = stack.back();
                stack.pop_back();
                const int px = static_cast<int>(p % mask.width);
                const int py = static_cast<int>(p / mask.width);
                for (int k = 0; k < 4; ++k) {
                    const int nx = px + kDx4[k], ny = py + kDy4[k];
                    if (!mask.in_bounds(nx, ny) || !mask.at(nx, ny) || out.at(nx, ny) != 0)
                        continue;
                    out.at(nx, ny) = next;
                    stack.push_back(static_cast<std::size_t>(ny) * mask.width + nx);
                }
            }
        }
    }
    return out;
}

BinaryMask dilate(const BinaryMask& mask, const DiskElement& disk) {
    BinaryMask out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            for (const auto& [dy, dx] : disk.offsets) {
                const int nx = x + dx, ny = y + dy;
                if (out.in_bounds(nx, ny)) out.at(nx, ny) = 1;
            }
        }
    }
    return out;
}

BinaryMask extract_contour_labels(const InstanceMask& instances, int radius) {
    BinaryMask boundary(instances.width, instances.height);
    for (int y = 0; y < instances.height; ++y) {
        for (int x = 0; x < instances.width; ++x) {
            const std::int32_t label = instances.at(x, y);
            if (label == 0) continue;
            for (int k = 0; k < 4; ++k) {
                const int nx = x + kDx4[k], ny = y + kDy4[k];
                if (!instances.in_bounds(nx, ny) || instances.at(nx, ny) != label) {
                    boundary.at(x, y) = 1;
                    break;
                }
            }
        }
    }
    return dilate(boundary, DiskElement::make(radius));
}

BinaryMask fill_holes(const BinaryMask& mask) {
    // Flood background from the border; anything unreached is a hole.
    BinaryMask reached(mask.width, mask.height);
    std::vector<std::size_t> stack;
    auto push = [&](int x, int y) {
        if (!mask.at(x, y) && !reached.at(x, y)) {
            reached.at(x, y) = 1;
            stack.push_back(static_cast<std::size_t>(y) * mask.width + x);
        }
    };
    for (int x = 0; x < mask.width; ++x) {
        push(x, 0);
        push(x, mask.height - 1);
    }
    for (int y = 0; y < mask.height; ++y) {
        push(0, y);
        push(mask.width - 1, y);
    }
    while (!stack.empty()) {
        const std::size_t p = stack.back();
        stack.pop_back();
        const int px = static_cast<int>(p % mask.width);
        const int py = static_cast<int>(p / mask.width);
        for (int k = 0; k < 4; ++k) {
            const int nx = px + kDx4[k], ny = py + kDy4[k];
            if (mask.in_bounds(nx, ny)) push(nx, ny);
        }
    }
    BinaryMask out(mask.width, mask.height);
    for (std::size_t i = 0; i < out.bits.size(); ++i)
        out.bits[i] = (mask.bits[i] || !reached.bits[i]) ? 1 : 0;
    return out;
}

BinaryMask remove_small(const BinaryMask& mask, int min_area) {
    if (min_area < 0) throw std::invalid_argument("remove_small: min_area must be >= 0");
    const InstanceMask comps = connected_components(mask);
    std::vector<int> area(static_cast<std::size_t>(comps.max_label()) + 1, 0);
    for (std::int32_t v : comps.labels)
        if (v > 0) ++area[v];
    BinaryMask out(mask.width, mask.height);
    for (std::size_t i = 0; i < out.bits.size(); ++i)
        out.bits[i] = (comps.labels[i] > 0 && area[comps.labels[i]] >= min_area) ? 1 : 0;
    return out;
}

BinaryMask smooth_disk(const BinaryMask& mask, int radius) {
    const DiskElement disk = DiskElement::make(radius);
    BinaryMask out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            int count = 0, on = 0;
            for (const auto& [dy, dx] : disk.offsets) {
                const int nx = x + dx, ny = y + dy;
                if (!mask.in_bounds(nx, ny)) continue;
                ++count;
                on += mask.at(nx, ny);
            }
            out.at(x, y) = (2 * on >= count) ? 1 : 0;  // mean >= 0.5 without division
        }
    }
    return out;
}

}  // namespace dcan
