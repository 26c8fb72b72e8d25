#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcan/image.hpp"
#include "dcan/rng.hpp"

namespace dcan {

// Parameters of the synthetic gland scenes standing in for real histology
// data: bright lumen surrounded by a darker epithelial ring on mid-intensity
// stroma, optionally degenerated (malignant) shapes without lumens.
struct GlandSceneSpec {
    int image_size = 64;
    int count_min = 2, count_max = 3;
    int radius_min = 12, radius_max = 18;       // gland semi-axis range, pixels
    int ring_min = 3, ring_max = 5;             // epithelial band thickness
    double lumen_intensity = 0.85;
    double ring_intensity = 0.30;
    double stroma_intensity = 0.60;
    double noise_sigma = 0.03;
    double touching_fraction = 0.5;             // fraction of glands placed in abutting pairs
    bool malignant_mode = false;                // elongated irregular shapes, no lumen

    void validate() const;
};

struct SceneManifestEntry {
    int scene_id = 0;
    std::uint64_t seed = 0;
};

// Renders one scene; fully determined by the rng seed. Placement failures
// after bounded retries yield fewer glands, never overlapping labels.
Sample generate_scene(const GlandSceneSpec& spec, Rng& rng);

struct Dataset {
    std::vector<Sample> samples;
    std::vector<SceneManifestEntry> manifest;
};

// n independent scenes with per-scene seeds recorded in the manifest.
Dataset generate_dataset(const GlandSceneSpec& spec, int n, Rng& rng);

void write_manifest(const std::string& path, const std::vector<SceneManifestEntry>& manifest);
std::vector<SceneManifestEntry> read_manifest(const std::string& path);

}  // namespace dcan
