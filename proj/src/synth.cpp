#include "dcan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "dcan/morphology.hpp"

namespace dcan {

void GlandSceneSpec::validate() const {
    if (image_size < 8) throw std::invalid_argument("scene: image_size must be >= 8");
    if (count_min < 0 || count_max < count_min)
        throw std::invalid_argument("scene: bad gland count range");
    if (radius_min < 4 || radius_max < radius_min)
        throw std::invalid_argument("scene: bad radius range");
    if (2 * radius_max >= image_size)
        throw std::invalid_argument("scene: radius_max too large for image_size");
    if (ring_min < 1 || ring_max < ring_min)
        throw std::invalid_argument("scene: bad ring thickness range");
    for (double v : {lumen_intensity, ring_intensity, stroma_intensity})
        if (v < 0.0 || v > 1.0) throw std::invalid_argument("scene: intensity outside [0,1]");
    if (noise_sigma < 0.0) throw std::invalid_argument("scene: noise_sigma must be >= 0");
    if (touching_fraction < 0.0 || touching_fraction > 1.0)
        throw std::invalid_argument("scene: touching_fraction outside [0,1]");
}

namespace {

struct GlandShape {
    std::vector<std::pair<int, int>> pixels;  // (dx, dy) offsets from the anchor
    std::vector<std::pair<int, int>> lumen;   // eroded interior, empty in malignant mode
    int extent = 0;                           // max |offset| component
};

constexpr int kDx4[4] = {1, -1, 0, 0};
constexpr int kDy4[4] = {0, 0, 1, -1};

// Perturbed ellipse: radius(theta) = 1 + sum of low harmonics in normalized
// polar coordinates. Malignant shapes are elongated with stronger harmonics.
// `shrink` in [0,1] narrows the radius range toward its minimum so that
// retries in crowded scenes still find room.
GlandShape make_shape(const GlandSceneSpec& spec, Rng& rng, double shrink = 0.0) {
    const int hi = std::max(
        spec.radius_min,
        spec.radius_min +
            static_cast<int>(std::lround((spec.radius_max - spec.radius_min) * (1.0 - shrink))));
    const double a = static_cast<double>(rng.uniform_int(spec.radius_min, hi));
    double b;
    double amp_cap;
    if (spec.malignant_mode) {
        const double elong = rng.uniform(1.8, 3.0);
        b = std::max(4.0, a / elong);
        amp_cap = 0.16;
    } else {
        b = std::max(4.0, a * rng.uniform(0.75, 1.0));
        amp_cap = 0.06;
    }
    const double phi = rng.uniform(0.0, 6.283185307179586);
    double amps[3], phases[3];
    for (int i = 0; i < 3; ++i) {
        amps[i] = rng.uniform(0.0, amp_cap);
        phases[i] = rng.uniform(0.0, 6.283185307179586);
    }
    int thickness = static_cast<int>(rng.uniform_int(spec.ring_min, spec.ring_max));

    const int ext = static_cast<int>(std::ceil(std::max(a, b) * 1.6)) + 1;
    const int side = 2 * ext + 1;
    BinaryMask grid(side, side);
    const double cphi = std::cos(phi), sphi = std::sin(phi);
    for (int dy = -ext; dy <= ext; ++dy) {
        for (int dx = -ext; dx <= ext; ++dx) {
            const double xr = dx * cphi + dy * sphi;
            const double yr = -dx * sphi + dy * cphi;
            const double nx = xr / a, ny = yr / b;
            const double rho = std::sqrt(nx * nx + ny * ny);
            const double theta = std::atan2(ny, nx);
            double limit = 1.0;
            for (int i = 0; i < 3; ++i) limit += amps[i] * std::cos((i + 2) * theta + phases[i]);
            if (rho <= limit) grid.at(dx + ext, dy + ext) = 1;
        }
    }
    // Keep only the component containing the center so labels stay 4-connected.
    const InstanceMask comps = connected_components(grid);
    const std::int32_t keep = comps.at(ext, ext);
    GlandShape shape;
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            if (comps.at(x, y) != keep || keep == 0) grid.at(x, y) = 0;
            if (grid.at(x, y)) {
                shape.pixels.emplace_back(x - ext, y - ext);
                shape.extent = std::max({shape.extent, std::abs(x - ext), std::abs(y - ext)});
            }
        }

    if (!spec.malignant_mode) {
        while (thickness >= 1) {
            const DiskElement disk = DiskElement::make(thickness);
            shape.lumen.clear();
            for (int y = 0; y < side; ++y) {
                for (int x = 0; x < side; ++x) {
                    if (!grid.at(x, y)) continue;
                    bool interior = true;
                    for (const auto& [ody, odx] : disk.offsets) {
                        const int jx = x + odx, jy = y + ody;
                        if (!grid.in_bounds(jx, jy) || !grid.at(jx, jy)) {
                            interior = false;
                            break;
                        }
                    }
                    if (interior) shape.lumen.emplace_back(x - ext, y - ext);
                }
            }
            if (!shape.lumen.empty()) break;
            --thickness;
        }
    }
    return shape;
}

bool fits(const GlandShape& shape, int cx, int cy, int size) {
    return cx - shape.extent >= 0 && cx + shape.extent < size && cy - shape.extent >= 0 &&
           cy + shape.extent < size;
}

bool overlaps(const GlandShape& shape, int cx, int cy, const InstanceMask& labels) {
    for (const auto& [dx, dy] : shape.pixels)
        if (labels.at(cx + dx, cy + dy) != 0) return true;
    return false;
}

// True when some pixel of the shape has a 4-neighbor carrying `target`.
bool adjacent_to(const GlandShape& shape, int cx, int cy, const InstanceMask& labels,
                 std::int32_t target) {
    for (const auto& [dx, dy] : shape.pixels) {
        for (int k = 0; k < 4; ++k) {
            const int nx = cx + dx + kDx4[k], ny = cy + dy + kDy4[k];
            if (labels.in_bounds(nx, ny) && labels.at(nx, ny) == target) return true;
        }
    }
    return false;
}

// True when some pixel of the shape has a 4-neighbor labeled with anything
// other than `except` (0 never counts).
bool adjacent_to_other(const GlandShape& shape, int cx, int cy, const InstanceMask& labels,
                       std::int32_t except) {
    for (const auto& [dx, dy] : shape.pixels) {
        for (int k = 0; k < 4; ++k) {
            const int nx = cx + dx + kDx4[k], ny = cy + dy + kDy4[k];
            if (!labels.in_bounds(nx, ny)) continue;
            const std::int32_t v = labels.at(nx, ny);
            if (v > 0 && v != except) return true;
        }
    }
    return false;
}

// Requires a clear band of `gap` pixels around the candidate (gap >= 1
// already rules out 4-adjacency and diagonal contact).
bool well_separated(const GlandShape& shape, int cx, int cy, const InstanceMask& labels,
                    int gap = 2) {
    for (const auto& [dx, dy] : shape.pixels) {
        for (int ody = -gap; ody <= gap; ++ody) {
            for (int odx = -gap; odx <= gap; ++odx) {
                const int nx = cx + dx + odx, ny = cy + dy + ody;
                if (labels.in_bounds(nx, ny) && labels.at(nx, ny) != 0) return false;
            }
        }
    }
    return true;
}

void stamp(const GlandShape& shape, int cx, int cy, std::int32_t label, InstanceMask& labels) {
    for (const auto& [dx, dy] : shape.pixels) labels.at(cx + dx, cy + dy) = label;
}

struct PlacedGland {
    GlandShape shape;
    int cx = 0, cy = 0;
};

}  // namespace

Sample generate_scene(const GlandSceneSpec& spec, Rng& rng) {
    spec.validate();
    const int size = spec.image_size;
    InstanceMask labels(size, size);
    std::vector<PlacedGland> placed;

    const int count = static_cast<int>(rng.uniform_int(spec.count_min, spec.count_max));
    const int paired = static_cast<int>(std::llround(spec.touching_fraction * count));
    const int n_pairs = paired / 2;
    std::int32_t next_label = 1;

    for (int p = 0; p < n_pairs; ++p) {
        bool done = false;
        for (int attempt = 0; attempt < 60 && !done; ++attempt) {
            const double shrink = attempt / 59.0;
            GlandShape sa = make_shape(spec, rng, shrink);
            GlandShape sb = make_shape(spec, rng, shrink);
            const int lo = sa.extent, hi = size - 1 - sa.extent;
            if (lo > hi) continue;
            const int ax = static_cast<int>(rng.uniform_int(lo, hi));
            const int ay = static_cast<int>(rng.uniform_int(lo, hi));
            if (!well_separated(sa, ax, ay, labels)) continue;

            const int dir = static_cast<int>(rng.uniform_int(0, 3));
            const int sx = kDx4[dir], sy = kDy4[dir];
            // Slide the partner along one axis from overlap to first contact;
            // the last overlapping step guarantees 4-adjacency at the stop.
            int bx = ax + sx, by = ay + sy;
            stamp(sa, ax, ay, next_label, labels);
            bool ok = false;
            for (int step = 0; step < 2 * size; ++step, bx += sx, by += sy) {
                if (!fits(sb, bx, by, size)) break;
                if (overlaps(sb, bx, by, labels)) continue;
                ok = adjacent_to(sb, bx, by, labels, next_label) &&
                     !adjacent_to_other(sb, bx, by, labels, next_label);
                break;
            }
            if (ok) {
                stamp(sb, bx, by, next_label + 1, labels);
                placed.push_back({sa, ax, ay});
                placed.push_back({sb, bx, by});
                next_label += 2;
                done = true;
            } else {
                // undo the first gland of the failed pair
                for (const auto& [dx, dy] : sa.pixels) labels.at(ax + dx, ay + dy) = 0;
            }
        }
    }

    const int singles = count - 2 * n_pairs;
    for (int s = 0; s < singles; ++s) {
        bool done = false;
        for (int attempt = 0; attempt < 40 && !done; ++attempt) {
            GlandShape sh = make_shape(spec, rng, attempt / 39.0);
            const int lo = sh.extent, hi = size - 1 - sh.extent;
            if (lo > hi) break;
            const int cx = static_cast<int>(rng.uniform_int(lo, hi));
            const int cy = static_cast<int>(rng.uniform_int(lo, hi));
            if (!well_separated(sh, cx, cy, labels)) continue;
            stamp(sh, cx, cy, next_label, labels);
            placed.push_back({sh, cx, cy});
            ++next_label;
            done = true;
        }
        if (!done) {
            // crowded scene: scan positions for the smallest shape instead of
            // giving up, so the requested count and touching fraction hold
            const GlandShape sh = make_shape(spec, rng, 1.0);
            for (int cy = sh.extent; cy < size - sh.extent && !done; ++cy)
                for (int cx = sh.extent; cx < size - sh.extent && !done; ++cx) {
                    if (!well_separated(sh, cx, cy, labels, 1)) continue;
                    stamp(sh, cx, cy, next_label, labels);
                    placed.push_back({sh, cx, cy});
                    ++next_label;
                    done = true;
                }
        }
    }

    Sample sample;
    sample.instances = labels;
    sample.image = ImageRgb(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            for (int c = 0; c < 3; ++c) sample.image.at(c, x, y) = spec.stroma_intensity;
    for (const auto& g : placed) {
        for (const auto& [dx, dy] : g.shape.pixels)
            for (int c = 0; c < 3; ++c)
                sample.image.at(c, g.cx + dx, g.cy + dy) = spec.ring_intensity;
        for (const auto& [dx, dy] : g.shape.lumen)
            for (int c = 0; c < 3; ++c)
                sample.image.at(c, g.cx + dx, g.cy + dy) = spec.lumen_intensity;
    }
    if (spec.noise_sigma > 0.0) {
        for (double& v : sample.image.data)
            v = std::clamp(v + rng.gaussian(0.0, spec.noise_sigma), 0.0, 1.0);
    }
    return sample;
}

Dataset generate_dataset(const GlandSceneSpec& spec, int n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
    Dataset ds;
    ds.samples.reserve(n);
    for (int i = 0; i < n; ++i) {
        const std::uint64_t seed = rng.fork_seed();
        Rng scene_rng(seed);
        ds.samples.push_back(generate_scene(spec, scene_rng));
        ds.manifest.push_back({i, seed});
    }
    return ds;
}

void write_manifest(const std::string& path, const std::vector<SceneManifestEntry>& manifest) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    for (const auto& e : manifest) out << e.scene_id << " " << e.seed << "\n";
    if (!out) throw std::runtime_error(path + ": write failed");
}

std::vector<SceneManifestEntry> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open for reading");
    std::vector<SceneManifestEntry> entries;
    SceneManifestEntry e;
    while (in >> e.scene_id >> e.seed) entries.push_back(e);
    return entries;
}

}  // namespace dcan
