#pragma once

#include <stdexcept>
#include <vector>

#include "dcan/mask.hpp"
#include "dcan/tensor.hpp"

namespace dcan {

// Planar RGB raster, values in [0,1]. Plane order R, G, B.
struct ImageRgb {
    int width = 0, height = 0;
    std::vector<double> data;  // 3 * width * height

    ImageRgb() = default;
    ImageRgb(int w, int h) : width(w), height(h), data(3 * static_cast<std::size_t>(w) * h, 0.0) {}

    double& at(int c, int x, int y) {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    double at(int c, int x, int y) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }

    Tensor to_tensor() const {
        Tensor t(1, 3, height, width);
        t.data = data;
        return t;
    }

    static ImageRgb from_tensor(const Tensor& t) {
        if (t.n != 1 || t.c != 3) throw std::invalid_argument("ImageRgb: tensor must be (1,3,H,W)");
        ImageRgb img(t.w, t.h);
        img.data = t.data;
        return img;
    }
};

// One training/evaluation example: image with its instance annotation.
struct Sample {
    ImageRgb image;
    InstanceMask instances;
};

// Paired full-resolution foreground probabilities for one image.
struct ProbabilityMaps {
    int width = 0, height = 0;
    std::vector<double> p_object;
    std::vector<double> p_contour;
    // Per-tap auxiliary foreground maps, training diagnostics only.
    std::vector<std::vector<double>> aux_object;
    std::vector<std::vector<double>> aux_contour;

    ProbabilityMaps() = default;
    ProbabilityMaps(int w, int h)
        : width(w), height(h),
          p_object(static_cast<std::size_t>(w) * h, 0.0),
          p_contour(static_cast<std::size_t>(w) * h, 0.0) {}
};

}  // namespace dcan
