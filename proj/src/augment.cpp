#include "dcan/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dcan {

int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

ImageRgb reflect_pad(const ImageRgb& image, int pad_w, int pad_h) {
    ImageRgb out(image.width + pad_w, image.height + pad_h);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x)
                out.at(c, x, y) = image.at(c, reflect_index(x, image.width), reflect_index(y, image.height));
    return out;
}

InstanceMask reflect_pad(const InstanceMask& mask, int pad_w, int pad_h) {
    InstanceMask out(mask.width + pad_w, mask.height + pad_h);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            out.at(x, y) = mask.at(reflect_index(x, mask.width), reflect_index(y, mask.height));
    return out;
}

Sample random_crop(const Sample& sample, int size, Rng& rng) {
    if (size < 1) throw std::invalid_argument("random_crop: size must be >= 1");
    Sample src = sample;
    if (src.image.width < size || src.image.height < size) {
        const int pw = std::max(0, size - src.image.width);
        const int ph = std::max(0, size - src.image.height);
        src.image = reflect_pad(src.image, pw, ph);
        src.instances = reflect_pad(src.instances, pw, ph);
    }
    const int oy = static_cast<int>(rng.uniform_int(0, src.image.height - size));
    const int ox = static_cast<int>(rng.uniform_int(0, src.image.width - size));

    Sample out;
    out.image = ImageRgb(size, size);
    out.instances = InstanceMask(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            for (int c = 0; c < 3; ++c) out.image.at(c, x, y) = src.image.at(c, ox + x, oy + y);
            out.instances.at(x, y) = src.instances.at(ox + x, oy + y);
        }
    }
    return out;
}

namespace {

// Bilinear lookup of one channel with reflected borders.
double sample_bilinear(const ImageRgb& img, int c, double x, double y) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    double acc = 0.0;
    const double wx[2] = {1.0 - fx, fx};
    const double wy[2] = {1.0 - fy, fy};
    for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
            const double w = wx[dx] * wy[dy];
            if (w == 0.0) continue;
            acc += w * img.at(c, reflect_index(x0 + dx, img.width), reflect_index(y0 + dy, img.height));
        }
    return acc;
}

struct ElasticField {
    int nodes_x = 0, nodes_y = 0, spacing = 1;
    std::vector<double> dx, dy;  // per node

    // Bilinear interpolation between nodes at pixel position (x, y).
    void displacement(double x, double y, double& out_dx, double& out_dy) const {
        if (nodes_x == 0) {
            out_dx = out_dy = 0.0;
            return;
        }
        const double gx = std::clamp(x / spacing, 0.0, static_cast<double>(nodes_x - 1));
        const double gy = std::clamp(y / spacing, 0.0, static_cast<double>(nodes_y - 1));
        const int x0 = std::min(static_cast<int>(gx), nodes_x - 2 >= 0 ? nodes_x - 2 : 0);
        const int y0 = std::min(static_cast<int>(gy), nodes_y - 2 >= 0 ? nodes_y - 2 : 0);
        const int x1 = std::min(x0 + 1, nodes_x - 1);
        const int y1 = std::min(y0 + 1, nodes_y - 1);
        const double fx = gx - x0, fy = gy - y0;
        auto node = [&](const std::vector<double>& v, int ix, int iy) {
            return v[static_cast<std::size_t>(iy) * nodes_x + ix];
        };
        out_dx = (1 - fy) * ((1 - fx) * node(dx, x0, y0) + fx * node(dx, x1, y0)) +
                 fy * ((1 - fx) * node(dx, x0, y1) + fx * node(dx, x1, y1));
        out_dy = (1 - fy) * ((1 - fx) * node(dy, x0, y0) + fx * node(dy, x1, y0)) +
                 fy * ((1 - fx) * node(dy, x0, y1) + fx * node(dy, x1, y1));
    }
};

ElasticField make_elastic_field(int width, int height, const AugmentSpec& spec, Rng& rng) {
    ElasticField f;
    f.spacing = std::max(1, spec.elastic_spacing);
    f.nodes_x = width / f.spacing + 2;
    f.nodes_y = height / f.spacing + 2;
    const std::size_t n = static_cast<std::size_t>(f.nodes_x) * f.nodes_y;
    f.dx.resize(n);
    f.dy.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        f.dx[i] = rng.gaussian(0.0, spec.elastic_sigma);
        f.dy[i] = rng.gaussian(0.0, spec.elastic_sigma);
    }
    // One binomial smoothing pass over the node grid.
    auto smooth = [&](std::vector<double>& v) {
        std::vector<double> s(v.size());
        for (int iy = 0; iy < f.nodes_y; ++iy) {
            for (int ix = 0; ix < f.nodes_x; ++ix) {
                double acc = 0.0, wsum = 0.0;
                for (int ky = -1; ky <= 1; ++ky) {
                    for (int kx = -1; kx <= 1; ++kx) {
                        const int jx = ix + kx, jy = iy + ky;
                        if (jx < 0 || jx >= f.nodes_x || jy < 0 || jy >= f.nodes_y) continue;
                        const double w = (2 - std::abs(kx)) * (2 - std::abs(ky));
                        acc += w * v[static_cast<std::size_t>(jy) * f.nodes_x + jx];
                        wsum += w;
                    }
                }
                s[static_cast<std::size_t>(iy) * f.nodes_x + ix] = acc / wsum;
            }
        }
        v.swap(s);
    };
    smooth(f.dx);
    smooth(f.dy);
    return f;
}

}  // namespace

Sample augment(const Sample& sample, const AugmentSpec& spec, Rng& rng) {
    const int w = sample.image.width, h = sample.image.height;
    if (w != sample.instances.width || h != sample.instances.height)
        throw std::invalid_argument("augment: image and mask dimensions differ");

    // Draw order is fixed: tx, ty, angle, radial k, then the elastic field.
    const double tx = spec.max_translation > 0 ? rng.uniform(-spec.max_translation, spec.max_translation) : 0.0;
    const double ty = spec.max_translation > 0 ? rng.uniform(-spec.max_translation, spec.max_translation) : 0.0;
    const double angle_deg = spec.rotation_max > spec.rotation_min
                                 ? rng.uniform(spec.rotation_min, spec.rotation_max)
                                 : spec.rotation_min;
    double k = 0.0;
    if (!spec.radial_k.empty())
        k = spec.radial_k[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(spec.radial_k.size()) - 1))];
    const ElasticField field = make_elastic_field(w, h, spec, rng);

    constexpr double pi = 3.14159265358979323846;
    const double theta = angle_deg * pi / 180.0;
    const double cs = std::cos(theta), sn = std::sin(theta);
    const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;

    Sample out;
    out.image = ImageRgb(w, h);
    out.instances = InstanceMask(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            // Inverse map: radial, elastic, inverse rotation, inverse translation.
            double px = x, py = y;
            if (k != 0.0) {
                const double rx = px - cx, ry = py - cy;
                const double r2 = rx * rx + ry * ry;
                px = cx + rx * (1.0 + k * r2);
                py = cy + ry * (1.0 + k * r2);
            }
            double ex, ey;
            field.displacement(px, py, ex, ey);
            px += ex;
            py += ey;
            const double rx = px - cx, ry = py - cy;
            const double sx = cx + cs * rx + sn * ry - tx;   // R(-theta)
            const double sy = cy - sn * rx + cs * ry - ty;
            for (int c = 0; c < 3; ++c) out.image.at(c, x, y) = sample_bilinear(sample.image, c, sx, sy);
            const int mx = reflect_index(static_cast<int>(std::lround(sx)), w);
            const int my = reflect_index(static_cast<int>(std::lround(sy)), h);
            out.instances.at(x, y) = sample.instances.at(mx, my);
        }
    }
    return out;
}

std::vector<std::pair<int, int>> plan_tiles(int image_w, int image_h, int tile, int stride) {
    if (tile < 1) throw std::invalid_argument("plan_tiles: tile must be >= 1");
    if (stride < 1 || stride > tile)
        throw std::invalid_argument("plan_tiles: stride must be in [1, tile]");
    if (tile > image_w || tile > image_h)
        throw std::invalid_argument("plan_tiles: tile exceeds image size");
    auto axis_offsets = [&](int size) {
        std::vector<int> offs;
        for (int o = 0; o + tile < size; o += stride) offs.push_back(o);
        offs.push_back(size - tile);  // clamped final tile
        return offs;
    };
    const std::vector<int> xs = axis_offsets(image_w);
    const std::vector<int> ys = axis_offsets(image_h);
    std::vector<std::pair<int, int>> tiles;
    tiles.reserve(xs.size() * ys.size());
    for (int y : ys)
        for (int x : xs) tiles.emplace_back(x, y);
    return tiles;
}

}  // namespace dcan
