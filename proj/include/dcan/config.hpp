#pragma once

#include <cstdint>
#include <string>

#include "dcan/augment.hpp"
#include "dcan/fusion.hpp"
#include "dcan/net.hpp"
#include "dcan/synth.hpp"

namespace dcan {

// Flat `section.key = value` configuration covering every tunable of the
// pipeline. Parsing is strict: unknown keys and malformed values are
// line-numbered errors; struct invariants are validated afterwards.
struct AppConfig {
    DcanConfig net;          // net.* (schedule under train.*)
    FusionParams fusion;     // fusion.*
    AugmentSpec augment;     // augment.*
    bool augment_enabled = true;
    GlandSceneSpec scene;    // scene.*
    int data_count = 16;     // data.*
    std::uint64_t data_seed = 1;
    std::uint64_t train_seed = 1;
    int contour_radius = 3;  // train.contour_radius
};

AppConfig parse_config_text(const std::string& text, const std::string& origin);
AppConfig parse_config_file(const std::string& path);

// Reference page: one line per key with type and default.
std::string config_reference();

}  // namespace dcan
