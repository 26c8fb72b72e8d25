#pragma once

#include <utility>
#include <vector>

#include "dcan/mask.hpp"

namespace dcan {

// Digital disk structuring element: all offsets (dy,dx) with dy^2+dx^2 <= r^2.
struct DiskElement {
    int radius = 0;
    std::vector<std::pair<int, int>> offsets;  // (dy, dx)

    static DiskElement make(int radius);
};

// 4-connected component labeling; labels assigned 1..n in raster order of
// each component's first-encountered pixel.
InstanceMask connected_components(const BinaryMask& mask);

// Minkowski sum with the disk, clipped at the borders.
BinaryMask dilate(const BinaryMask& mask, const DiskElement& disk);

// Boundary pixels (>= 1 4-neighbor outside the pixel's own label; the image
// border counts as outside) dilated by disk(radius). Touching objects both
// contribute their sides of the shared edge.
BinaryMask extract_contour_labels(const InstanceMask& instances, int radius = 3);

// Background components not 4-connected to the image border become foreground.
BinaryMask fill_holes(const BinaryMask& mask);

// Removes 4-connected components with fewer than min_area pixels.
BinaryMask remove_small(const BinaryMask& mask, int min_area);

// Mean filter over the disk neighborhood (border-clipped), re-thresholded
// at >= 0.5.
BinaryMask smooth_disk(const BinaryMask& mask, int radius = 3);

}  // namespace dcan
