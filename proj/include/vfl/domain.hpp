#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vfl/errors.hpp"
#include "vfl/toml.hpp"

namespace vfl {

/// One bitrate-ladder rung: encode height plus CBR target bitrate.
/// Rungs are keyed by ladder index; heights may repeat across rungs.
struct Representation {
    int height = 0;                  // pixels
    std::int64_t bitrate_bps = 0;    // bits per second

    bool operator==(const Representation&) const = default;
};

/// Per-segment complexity triple: average luma texture energy, average
/// temporal gradient of that energy, and average luma level.
struct SegmentFeatures {
    double energy = 0.0;     // >= 0, dimensionless
    double gradient = 0.0;   // >= 0, dimensionless
    double luminance = 0.0;  // [0, 2^bitdepth - 1]

    bool operator==(const SegmentFeatures&) const = default;
};

/// Ladder construction parameters: the rung set, the framerates and encoder
/// presets the service supports, the live encoding-speed floor, and the
/// perceptual pruning thresholds.
struct LadderConfig {
    std::vector<Representation> representations;  // ascending bitrate
    std::vector<double> framerates;               // ascending, fps
    std::vector<int> presets;                     // ascending, 0 = fastest
    double target_speed_fps = 0.0;                // encoding-speed floor
    double jnd_vmaf = 0.0;                        // min perceptible VMAF gap
    double vmaf_threshold = 0.0;                  // "perceptually lossless" cap

    bool operator==(const LadderConfig&) const = default;
};

/// A rung with its selected framerate/preset and the model scores behind
/// the selection. `infeasible` marks rungs where no configuration met the
/// speed floor and the fallback (lowest framerate, fastest preset) is used.
struct LadderEntry {
    Representation rep;
    double framerate = 0.0;
    int preset = 0;
    double predicted_vmaf = 0.0;
    double predicted_speed = 0.0;
    bool infeasible = false;

    bool operator==(const LadderEntry&) const = default;
};

/// One observed encoding: the training/evaluation row.
struct EncodingRecord {
    std::string segment_id;
    SegmentFeatures features;
    Representation rep;
    double framerate = 0.0;
    int preset = 0;
    double measured_vmaf = 0.0;
    std::optional<double> measured_psnr;
    double measured_speed = 0.0;
    std::optional<double> measured_bitrate;  // bps; target bitrate when absent
    std::optional<double> measured_energy;   // joules
};

/// Standard nine-rung HLS ladder with framerates {7.5, 15, 24, 30},
/// presets 0..8, a 30 fps speed floor, and a 6-point JND.
inline LadderConfig default_config() {
    LadderConfig c;
    c.representations = {
        {234, 145000},   {360, 365000},   {432, 730000},
        {432, 1100000},  {540, 2000000},  {720, 3000000},
        {720, 4500000},  {1080, 6000000}, {1080, 7800000},
    };
    c.framerates = {7.5, 15.0, 24.0, 30.0};
    c.presets = {0, 1, 2, 3, 4, 5, 6, 7, 8};
    c.target_speed_fps = 30.0;
    c.jnd_vmaf = 6.0;
    c.vmaf_threshold = 100.0 - c.jnd_vmaf;
    return c;
}

/// All invariant violations, one message per field. Empty means valid.
inline std::vector<std::string> validate(const LadderConfig& c) {
    std::vector<std::string> errors;
    if (c.representations.empty()) {
        errors.push_back("representations empty");
    } else {
        for (std::size_t i = 0; i < c.representations.size(); ++i) {
            const auto& r = c.representations[i];
            if (r.height <= 0) errors.push_back("representations: height must be positive");
            if (r.bitrate_bps <= 0) errors.push_back("representations: bitrate must be positive");
            if (i > 0 && c.representations[i - 1].bitrate_bps >= r.bitrate_bps) {
                errors.push_back("representations not ascending in bitrate");
                break;
            }
        }
    }
    if (c.framerates.empty()) {
        errors.push_back("framerates empty");
    } else {
        for (std::size_t i = 0; i < c.framerates.size(); ++i) {
            if (!(c.framerates[i] > 0)) errors.push_back("framerates: values must be positive");
            if (i > 0 && !(c.framerates[i - 1] < c.framerates[i])) {
                errors.push_back("framerates not ascending");
                break;
            }
        }
    }
    if (c.presets.empty()) {
        errors.push_back("presets empty");
    } else {
        for (std::size_t i = 0; i < c.presets.size(); ++i) {
            if (c.presets[i] != c.presets.front() + static_cast<int>(i)) {
                errors.push_back("presets not contiguous ascending");
                break;
            }
        }
    }
    if (!(c.target_speed_fps > 0)) errors.push_back("target_speed_fps out of range");
    if (!(c.jnd_vmaf > 0) || !(c.jnd_vmaf < 100)) errors.push_back("jnd_vmaf out of range");
    if (!std::isfinite(c.vmaf_threshold) || c.vmaf_threshold > 100)
        errors.push_back("vmaf_threshold out of range");
    return errors;
}

inline nlohmann::json to_json(const LadderConfig& c) {
    nlohmann::json reps = nlohmann::json::array();
    for (const auto& r : c.representations)
        reps.push_back({{"height", r.height}, {"bitrate_bps", r.bitrate_bps}});
    return {
        {"representations", reps},
        {"framerates", c.framerates},
        {"presets", c.presets},
        {"target_speed_fps", c.target_speed_fps},
        {"jnd_vmaf", c.jnd_vmaf},
        {"vmaf_threshold", c.vmaf_threshold},
    };
}

inline LadderConfig config_from_json(const nlohmann::json& j) {
    LadderConfig base = default_config();
    LadderConfig c;
    if (j.contains("representations")) {
        for (const auto& r : j.at("representations")) {
            Representation rep;
            rep.height = r.at("height").get<int>();
            // Accept either exact bits/s or fractional Mbps.
            if (r.contains("bitrate_bps"))
                rep.bitrate_bps = r.at("bitrate_bps").get<std::int64_t>();
            else
                rep.bitrate_bps =
                    static_cast<std::int64_t>(std::llround(r.at("bitrate_mbps").get<double>() * 1e6));
            c.representations.push_back(rep);
        }
    } else {
        c.representations = base.representations;
    }
    c.framerates = j.value("framerates", base.framerates);
    c.presets = j.value("presets", base.presets);
    c.target_speed_fps = j.value("target_speed_fps", base.target_speed_fps);
    c.jnd_vmaf = j.value("jnd_vmaf", base.jnd_vmaf);
    c.vmaf_threshold = j.value("vmaf_threshold", 100.0 - c.jnd_vmaf);
    return c;
}

inline LadderConfig config_from_toml(const toml::Document& doc) {
    LadderConfig base = default_config();
    LadderConfig c = base;
    if (auto it = doc.find("representations"); it != doc.end()) {
        c.representations.clear();
        for (const auto& pair : it->second.array) {
            if (pair.kind != toml::Value::Kind::Array || pair.array.size() != 2)
                throw FormatError("representations entries must be [height, bitrate_bps]");
            Representation rep;
            rep.height = static_cast<int>(pair.array[0].number);
            rep.bitrate_bps = static_cast<std::int64_t>(std::llround(pair.array[1].number));
            c.representations.push_back(rep);
        }
    }
    if (auto it = doc.find("framerates"); it != doc.end()) {
        c.framerates.clear();
        for (const auto& v : it->second.array) c.framerates.push_back(v.number);
    }
    if (auto it = doc.find("presets"); it != doc.end()) {
        c.presets.clear();
        for (const auto& v : it->second.array) c.presets.push_back(static_cast<int>(v.number));
    }
    c.target_speed_fps = toml::number_at(doc, "target_speed_fps", base.target_speed_fps);
    c.jnd_vmaf = toml::number_at(doc, "jnd_vmaf", base.jnd_vmaf);
    c.vmaf_threshold = toml::number_at(doc, "vmaf_threshold", 100.0 - c.jnd_vmaf);
    return c;
}

/// Loads a config from a .json or .toml file and validates it.
inline LadderConfig load_config(const std::string& path) {
    LadderConfig c;
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw FormatError("cannot open '" + path + "'");
        nlohmann::json j;
        try {
            f >> j;
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path + ": " + e.what());
        }
        c = config_from_json(j);
    } else {
        c = config_from_toml(toml::parse_file(path));
    }
    const auto errors = validate(c);
    if (!errors.empty()) {
        std::string msg = path + ": invalid config:";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw FormatError(msg);
    }
    return c;
}

}  // namespace vfl
