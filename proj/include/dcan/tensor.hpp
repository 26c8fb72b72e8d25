#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcan {

// Dense rank-4 array (batch, channel, height, width), row-major, double
// precision. Carries activations, weights and gradients alike.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_) {
        if (n_ < 0 || c_ < 0 || h_ < 0 || w_ < 0)
            throw std::invalid_argument("Tensor: negative dimension");
        data.assign(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0);
    }

    std::size_t size() const { return data.size(); }

    std::size_t index(int in, int ic, int iy, int ix) const {
        return ((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix;
    }

    double& at(int in, int ic, int iy, int ix) { return data[index(in, ic, iy, ix)]; }
    double at(int in, int ic, int iy, int ix) const { return data[index(in, ic, iy, ix)]; }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    std::string shape_str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

inline void require_shape(const Tensor& t, int n, int c, int h, int w, const char* what) {
    if (t.n != n || t.c != c || t.h != h || t.w != w)
        throw std::invalid_argument(std::string(what) + ": expected shape (" +
                                    std::to_string(n) + "," + std::to_string(c) + "," +
                                    std::to_string(h) + "," + std::to_string(w) +
                                    "), got " + t.shape_str());
}

}  // namespace dcan
