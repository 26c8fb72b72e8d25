#include "dcan/fusion.hpp"

#include <stdexcept>

#include "dcan/morphology.hpp"

namespace dcan {

void FusionParams::validate() const {
    if (t_object <= 0.0 || t_object >= 1.0 || t_contour <= 0.0 || t_contour >= 1.0)
        throw std::invalid_argument("fusion: thresholds must lie in (0,1)");
    if (smooth_radius < 0) throw std::invalid_argument("fusion: smooth_radius must be >= 0");
    if (min_area < 0) throw std::invalid_argument("fusion: min_area must be >= 0");
}

BinaryMask fuse(const std::vector<double>& p_object, const std::vector<double>& p_contour,
                int width, int height, const FusionParams& params) {
    params.validate();
    const std::size_t plane = static_cast<std::size_t>(width) * height;
    if (p_object.size() != plane || p_contour.size() != plane)
        throw std::invalid_argument("fuse: probability plane size mismatch");
    BinaryMask m(width, height);
    for (std::size_t i = 0; i < plane; ++i)
        m.bits[i] = (p_object[i] >= params.t_object && p_contour[i] < params.t_contour) ? 1 : 0;
    return m;
}

BinaryMask fuse(const ProbabilityMaps& maps, const FusionParams& params) {
    return fuse(maps.p_object, maps.p_contour, maps.width, maps.height, params);
}

InstanceMask postprocess(const BinaryMask& mask, const FusionParams& params) {
    params.validate();
    BinaryMask m = smooth_disk(mask, params.smooth_radius);
    m = fill_holes(m);
    m = remove_small(m, params.min_area);
    return connected_components(m);
}

InstanceMask segment_objects_only(const ProbabilityMaps& maps, const FusionParams& params) {
    params.validate();
    const std::size_t plane = static_cast<std::size_t>(maps.width) * maps.height;
    if (maps.p_object.size() != plane)
        throw std::invalid_argument("segment_objects_only: probability plane size mismatch");
    BinaryMask m(maps.width, maps.height);
    for (std::size_t i = 0; i < plane; ++i)
        m.bits[i] = maps.p_object[i] >= params.t_object ? 1 : 0;
    return postprocess(m, params);
}

InstanceMask segment(const ProbabilityMaps& maps, const FusionParams& params) {
    return postprocess(fuse(maps, params), params);
}

}  // namespace dcan
