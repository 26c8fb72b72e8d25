#include "dcan/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace dcan {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

long parse_long(const std::string& v) {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters after integer");
    return x;
}

double parse_double(const std::string& v) {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters after number");
    return x;
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("expected true/false/1/0");
}

std::uint64_t parse_u64(const std::string& v) {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters after integer");
    return x;
}

std::vector<std::string> split_commas(const std::string& v) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : v) {
        if (ch == ',') {
            parts.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    parts.push_back(trim(cur));
    return parts;
}

std::vector<int> parse_int_list(const std::string& v) {
    std::vector<int> out;
    for (const std::string& p : split_commas(v)) out.push_back(static_cast<int>(parse_long(p)));
    return out;
}

std::vector<double> parse_double_list(const std::string& v) {
    std::vector<double> out;
    for (const std::string& p : split_commas(v)) out.push_back(parse_double(p));
    return out;
}

struct KeyDoc {
    const char* key;
    const char* type;
    const char* doc;
};

// clang-format off
constexpr KeyDoc kKeyDocs[] = {
    {"net.input_size",          "int",         "training crop / inference tile edge, divisible by 2^num_pool_stages"},
    {"net.input_channels",      "int",         "image channels fed to the network"},
    {"net.num_pool_stages",     "int",         "downsampling stages (each halves resolution)"},
    {"net.channels_per_stage",  "int list",    "feature widths, one per stage"},
    {"net.convs_per_stage",     "int",         "3x3 convolutions per stage"},
    {"net.branch_taps",         "int list",    "stages whose features feed full-resolution heads"},
    {"net.upsample_channels",   "int",         "channels produced by each tap deconvolution"},
    {"net.dropout_rate",        "real",        "dropout inside the 1x1 classifier blocks"},
    {"net.lambda",              "real",        "L2 weight-decay coefficient"},
    {"train.lr0",               "real",        "initial learning rate"},
    {"train.lr_drop_factor",    "real",        "learning-rate division on plateau"},
    {"train.lr_floor",          "real",        "learning-rate lower bound"},
    {"train.lr_patience",       "int",         "iterations per plateau window"},
    {"train.lr_min_rel_improve","real",        "required relative improvement per window"},
    {"train.wa0",               "real",        "initial auxiliary discount weight"},
    {"train.wa_drop_factor",    "real",        "discount-weight division per interval"},
    {"train.wa_interval",       "int",         "iterations between discount drops"},
    {"train.wa_floor",          "real",        "discount-weight lower bound"},
    {"train.max_iters",         "int",         "training iterations"},
    {"train.seed",              "uint64",      "training RNG seed"},
    {"train.contour_radius",    "int",         "disk radius for contour label generation"},
    {"augment.enabled",         "bool",        "apply augmentation during training"},
    {"augment.max_translation", "real",        "max |translation| per axis, pixels"},
    {"augment.rotation_min",    "real",        "rotation range lower bound, degrees"},
    {"augment.rotation_max",    "real",        "rotation range upper bound, degrees"},
    {"augment.elastic_spacing", "int",         "elastic displacement grid spacing, pixels"},
    {"augment.elastic_sigma",   "real",        "elastic node displacement sigma, pixels"},
    {"augment.radial_k",        "real list",   "barrel/pincushion coefficients drawn per sample"},
    {"fusion.t_object",         "real",        "object probability threshold (inclusive)"},
    {"fusion.t_contour",        "real",        "contour probability threshold (strict)"},
    {"fusion.smooth_radius",    "int",         "disk radius of the post-processing smoother"},
    {"fusion.min_area",         "int",         "minimum surviving instance area, pixels"},
    {"scene.image_size",        "int",         "generated image edge, pixels"},
    {"scene.count_min",         "int",         "minimum glands per scene"},
    {"scene.count_max",         "int",         "maximum glands per scene"},
    {"scene.radius_min",        "int",         "minimum gland semi-axis, pixels"},
    {"scene.radius_max",        "int",         "maximum gland semi-axis, pixels"},
    {"scene.ring_min",          "int",         "minimum epithelial band thickness"},
    {"scene.ring_max",          "int",         "maximum epithelial band thickness"},
    {"scene.lumen_intensity",   "real",        "lumen gray level in [0,1]"},
    {"scene.ring_intensity",    "real",        "epithelial band gray level in [0,1]"},
    {"scene.stroma_intensity",  "real",        "background gray level in [0,1]"},
    {"scene.noise_sigma",       "real",        "Gaussian pixel noise sigma"},
    {"scene.touching_fraction", "real",        "fraction of glands placed in abutting pairs"},
    {"scene.malignant",         "bool",        "elongated irregular shapes without lumens"},
    {"data.count",              "int",         "scenes generated by gen-data"},
    {"data.seed",               "uint64",      "scene generation RNG seed"},
};
// clang-format on

}  // namespace

AppConfig parse_config_text(const std::string& text, const std::string& origin) {
    AppConfig cfg;

    std::map<std::string, std::function<void(const std::string&)>> handlers;
    auto set_int = [&](const char* key, int& target) {
        handlers[key] = [&target](const std::string& v) { target = static_cast<int>(parse_long(v)); };
    };
    auto set_long = [&](const char* key, long& target) {
        handlers[key] = [&target](const std::string& v) { target = parse_long(v); };
    };
    auto set_double = [&](const char* key, double& target) {
        handlers[key] = [&target](const std::string& v) { target = parse_double(v); };
    };
    auto set_bool = [&](const char* key, bool& target) {
        handlers[key] = [&target](const std::string& v) { target = parse_bool(v); };
    };
    auto set_u64 = [&](const char* key, std::uint64_t& target) {
        handlers[key] = [&target](const std::string& v) { target = parse_u64(v); };
    };

    set_int("net.input_size", cfg.net.input_size);
    set_int("net.input_channels", cfg.net.input_channels);
    set_int("net.num_pool_stages", cfg.net.num_pool_stages);
    handlers["net.channels_per_stage"] = [&cfg](const std::string& v) {
        cfg.net.channels_per_stage = parse_int_list(v);
    };
    set_int("net.convs_per_stage", cfg.net.convs_per_stage);
    handlers["net.branch_taps"] = [&cfg](const std::string& v) {
        cfg.net.branch_taps = parse_int_list(v);
    };
    set_int("net.upsample_channels", cfg.net.upsample_channels);
    set_double("net.dropout_rate", cfg.net.dropout_rate);
    set_double("net.lambda", cfg.net.lambda);

    TrainSchedule& sched = cfg.net.schedule;
    set_double("train.lr0", sched.lr0);
    set_double("train.lr_drop_factor", sched.lr_drop_factor);
    set_double("train.lr_floor", sched.lr_floor);
    set_int("train.lr_patience", sched.lr_patience);
    set_double("train.lr_min_rel_improve", sched.lr_min_rel_improve);
    set_double("train.wa0", sched.wa0);
    set_double("train.wa_drop_factor", sched.wa_drop_factor);
    set_int("train.wa_interval", sched.wa_interval);
    set_double("train.wa_floor", sched.wa_floor);
    set_long("train.max_iters", sched.max_iters);
    set_u64("train.seed", cfg.train_seed);
    set_int("train.contour_radius", cfg.contour_radius);

    set_bool("augment.enabled", cfg.augment_enabled);
    set_double("augment.max_translation", cfg.augment.max_translation);
    set_double("augment.rotation_min", cfg.augment.rotation_min);
    set_double("augment.rotation_max", cfg.augment.rotation_max);
    set_int("augment.elastic_spacing", cfg.augment.elastic_spacing);
    set_double("augment.elastic_sigma", cfg.augment.elastic_sigma);
    handlers["augment.radial_k"] = [&cfg](const std::string& v) {
        cfg.augment.radial_k = parse_double_list(v);
    };

    set_double("fusion.t_object", cfg.fusion.t_object);
    set_double("fusion.t_contour", cfg.fusion.t_contour);
    set_int("fusion.smooth_radius", cfg.fusion.smooth_radius);
    set_int("fusion.min_area", cfg.fusion.min_area);

    set_int("scene.image_size", cfg.scene.image_size);
    set_int("scene.count_min", cfg.scene.count_min);
    set_int("scene.count_max", cfg.scene.count_max);
    set_int("scene.radius_min", cfg.scene.radius_min);
    set_int("scene.radius_max", cfg.scene.radius_max);
    set_int("scene.ring_min", cfg.scene.ring_min);
    set_int("scene.ring_max", cfg.scene.ring_max);
    set_double("scene.lumen_intensity", cfg.scene.lumen_intensity);
    set_double("scene.ring_intensity", cfg.scene.ring_intensity);
    set_double("scene.stroma_intensity", cfg.scene.stroma_intensity);
    set_double("scene.noise_sigma", cfg.scene.noise_sigma);
    set_double("scene.touching_fraction", cfg.scene.touching_fraction);
    set_bool("scene.malignant", cfg.scene.malignant_mode);

    set_int("data.count", cfg.data_count);
    set_u64("data.seed", cfg.data_seed);

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                     ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = handlers.find(key);
        if (it == handlers.end())
            throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": unknown key '" +
                                     key + "'");
        try {
            it->second(value);
        } catch (const std::exception& e) {
            throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": bad value for '" +
                                     key + "': " + e.what());
        }
    }

    try {
        cfg.net.validate();
        cfg.fusion.validate();
        cfg.scene.validate();
        if (cfg.data_count < 1) throw std::invalid_argument("data.count must be >= 1");
        if (cfg.contour_radius < 0) throw std::invalid_argument("train.contour_radius must be >= 0");
    } catch (const std::exception& e) {
        throw std::runtime_error(origin + ": " + e.what());
    }
    return cfg;
}

AppConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

std::string config_reference() {
    const AppConfig defaults;
    std::map<std::string, std::string> default_values;
    auto fmt_double = [](double v) {
        std::ostringstream ss;
        ss << v;
        return ss.str();
    };
    auto fmt_list = [](const std::vector<int>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
        return s;
    };
    auto fmt_dlist = [&](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt_double(v[i]);
        return s;
    };
    default_values["net.input_size"] = std::to_string(defaults.net.input_size);
    default_values["net.input_channels"] = std::to_string(defaults.net.input_channels);
    default_values["net.num_pool_stages"] = std::to_string(defaults.net.num_pool_stages);
    default_values["net.channels_per_stage"] = fmt_list(defaults.net.channels_per_stage);
    default_values["net.convs_per_stage"] = std::to_string(defaults.net.convs_per_stage);
    default_values["net.branch_taps"] = fmt_list(defaults.net.branch_taps);
    default_values["net.upsample_channels"] = std::to_string(defaults.net.upsample_channels);
    default_values["net.dropout_rate"] = fmt_double(defaults.net.dropout_rate);
    default_values["net.lambda"] = fmt_double(defaults.net.lambda);
    default_values["train.lr0"] = fmt_double(defaults.net.schedule.lr0);
    default_values["train.lr_drop_factor"] = fmt_double(defaults.net.schedule.lr_drop_factor);
    default_values["train.lr_floor"] = fmt_double(defaults.net.schedule.lr_floor);
    default_values["train.lr_patience"] = std::to_string(defaults.net.schedule.lr_patience);
    default_values["train.lr_min_rel_improve"] =
        fmt_double(defaults.net.schedule.lr_min_rel_improve);
    default_values["train.wa0"] = fmt_double(defaults.net.schedule.wa0);
    default_values["train.wa_drop_factor"] = fmt_double(defaults.net.schedule.wa_drop_factor);
    default_values["train.wa_interval"] = std::to_string(defaults.net.schedule.wa_interval);
    default_values["train.wa_floor"] = fmt_double(defaults.net.schedule.wa_floor);
    default_values["train.max_iters"] = std::to_string(defaults.net.schedule.max_iters);
    default_values["train.seed"] = std::to_string(defaults.train_seed);
    default_values["train.contour_radius"] = std::to_string(defaults.contour_radius);
    default_values["augment.enabled"] = defaults.augment_enabled ? "true" : "false";
    default_values["augment.max_translation"] = fmt_double(defaults.augment.max_translation);
    default_values["augment.rotation_min"] = fmt_double(defaults.augment.rotation_min);
    default_values["augment.rotation_max"] = fmt_double(defaults.augment.rotation_max);
    default_values["augment.elastic_spacing"] = std::to_string(defaults.augment.elastic_spacing);
    default_values["augment.elastic_sigma"] = fmt_double(defaults.augment.elastic_sigma);
    default_values["augment.radial_k"] = fmt_dlist(defaults.augment.radial_k);
    default_values["fusion.t_object"] = fmt_double(defaults.fusion.t_object);
    default_values["fusion.t_contour"] = fmt_double(defaults.fusion.t_contour);
    default_values["fusion.smooth_radius"] = std::to_string(defaults.fusion.smooth_radius);
    default_values["fusion.min_area"] = std::to_string(defaults.fusion.min_area);
    default_values["scene.image_size"] = std::to_string(defaults.scene.image_size);
    default_values["scene.count_min"] = std::to_string(defaults.scene.count_min);
    default_values["scene.count_max"] = std::to_string(defaults.scene.count_max);
    default_values["scene.radius_min"] = std::to_string(defaults.scene.radius_min);
    default_values["scene.radius_max"] = std::to_string(defaults.scene.radius_max);
    default_values["scene.ring_min"] = std::to_string(defaults.scene.ring_min);
    default_values["scene.ring_max"] = std::to_string(defaults.scene.ring_max);
    default_values["scene.lumen_intensity"] = fmt_double(defaults.scene.lumen_intensity);
    default_values["scene.ring_intensity"] = fmt_double(defaults.scene.ring_intensity);
    default_values["scene.stroma_intensity"] = fmt_double(defaults.scene.stroma_intensity);
    default_values["scene.noise_sigma"] = fmt_double(defaults.scene.noise_sigma);
    default_values["scene.touching_fraction"] = fmt_double(defaults.scene.touching_fraction);
    default_values["scene.malignant"] = defaults.scene.malignant_mode ? "true" : "false";
    default_values["data.count"] = std::to_string(defaults.data_count);
    default_values["data.seed"] = std::to_string(defaults.data_seed);

    std::ostringstream out;
    out << "# Configuration keys\n#\n# key = value, '#' starts a comment, whitespace around '=' ignored.\n\n";
    for (const KeyDoc& d : kKeyDocs)
        out << d.key << " = " << default_values[d.key] << "  # " << d.type << "; " << d.doc
            << "\n";
    return out.str();
}

}  // namespace dcan
