#pragma once

#include <vector>

#include "dcan/image.hpp"
#include "dcan/mask.hpp"

namespace dcan {

struct FusionParams {
    double t_object = 0.5;
    double t_contour = 0.5;
    int smooth_radius = 3;
    int min_area = 64;

    void validate() const;
};

// m(x) = 1 iff p_o(x) >= t_o and p_c(x) < t_c (inclusive on objects, strict
// on contours).
BinaryMask fuse(const ProbabilityMaps& maps, const FusionParams& params);
BinaryMask fuse(const std::vector<double>& p_object, const std::vector<double>& p_contour,
                int width, int height, const FusionParams& params);

// smooth_disk -> fill_holes -> remove_small -> connected_components.
InstanceMask postprocess(const BinaryMask& mask, const FusionParams& params);

// Ablation baseline: threshold p_o alone, then the same post-processing.
InstanceMask segment_objects_only(const ProbabilityMaps& maps, const FusionParams& params);

InstanceMask segment(const ProbabilityMaps& maps, const FusionParams& params);

}  // namespace dcan
