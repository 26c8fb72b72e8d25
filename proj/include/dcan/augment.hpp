#pragma once

#include <utility>
#include <vector>

#include "dcan/image.hpp"
#include "dcan/rng.hpp"

namespace dcan {

struct AugmentSpec {
    double max_translation = 4.0;        // pixels, each axis
    double rotation_min = 0.0;           // degrees, uniform in [min, max)
    double rotation_max = 360.0;
    int elastic_spacing = 16;            // displacement grid spacing, pixels
    double elastic_sigma = 2.0;          // node displacement std dev, pixels
    std::vector<double> radial_k = {-1e-6, 0.0, 1e-6};  // barrel/pincushion set

    static AugmentSpec identity() {
        AugmentSpec s;
        s.max_translation = 0.0;
        s.rotation_min = s.rotation_max = 0.0;
        s.elastic_sigma = 0.0;
        s.radial_k = {0.0};
        return s;
    }
};

// Axis-aligned crop at a uniform offset; image and mask share the offset and
// mask labels are preserved. Images smaller than `size` are reflect-padded
// first.
Sample random_crop(const Sample& sample, int size, Rng& rng);

// Translation, rotation about the image center, then elastic warp. Image
// sampled bilinearly, mask nearest-neighbor, out-of-domain pixels reflected.
Sample augment(const Sample& sample, const AugmentSpec& spec, Rng& rng);

// Deterministic sorted tile offsets at stride multiples; the final row and
// column are clamped in-bounds so the tiles cover every pixel.
std::vector<std::pair<int, int>> plan_tiles(int image_w, int image_h, int tile, int stride);

// Mirror index into [0, n): ...cba|abc...cba|abc... (edge repeated).
int reflect_index(int i, int n);

ImageRgb reflect_pad(const ImageRgb& image, int pad_w, int pad_h);
InstanceMask reflect_pad(const InstanceMask& mask, int pad_w, int pad_h);

}  // namespace dcan
