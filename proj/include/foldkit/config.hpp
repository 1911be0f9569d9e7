#pragma once

#include <set>
#include <string>

#include <json.hpp>

#include "foldkit/common.hpp"
#include "foldkit/geometry.hpp"
#include "foldkit/nn/model.hpp"
#include "foldkit/scene.hpp"

namespace foldkit {

using Json = nlohmann::json;

// Strict object reader: every field is optional (defaults stay in place),
// unknown keys are rejected so config typos fail loudly.
class JsonReader {
  public:
    JsonReader(const Json& j, std::string context)
        : json_(j), context_(std::move(context)) {
        if (!j.is_object())
            throw ConfigError(context_ + ": expected a JSON object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        used_.insert(key);
        const auto it = json_.find(key);
        if (it == json_.end()) return;
        try {
            out = it->get<T>();
        } catch (const Json::exception& e) {
            throw ConfigError(context_ + "." + key + ": " + e.what());
        }
    }

    void get_range(const char* key, Range& out) {
        used_.insert(key);
        const auto it = json_.find(key);
        if (it == json_.end()) return;
        if (!it->is_array() || it->size() != 2)
            throw ConfigError(context_ + "." + key + ": expected [min, max]");
        out.lo = (*it)[0].get<double>();
        out.hi = (*it)[1].get<double>();
    }

    bool has(const char* key) const { return json_.contains(key); }

    const Json& sub(const char* key) {
        used_.insert(key);
        return json_.at(key);
    }

    // Call after all fields were read.
    void finish() const {
        for (const auto& [key, value] : json_.items())
            if (!used_.count(key))
                throw ConfigError(context_ + ": unknown key '" + key + "'");
    }

  private:
    const Json& json_;
    std::string context_;
    std::set<std::string> used_;
};

inline Json range_to_json(const Range& r) { return Json::array({r.lo, r.hi}); }

inline Json gen_config_to_json(const GenConfig& c) {
    Json j;
    j["resolution"] = c.resolution;
    j["towel_width"] = range_to_json(c.towel_width);
    j["towel_height"] = range_to_json(c.towel_height);
    j["workspace_halfwidth"] = c.workspace_halfwidth;
    j["corner_jitter_max"] = c.corner_jitter_max;
    j["wrinkle_amplitude"] = range_to_json(c.wrinkle_amplitude);
    j["wrinkle_frequency"] = range_to_json(c.wrinkle_frequency);
    j["towel_saturation"] = range_to_json(c.towel_saturation);
    j["towel_value"] = range_to_json(c.towel_value);
    j["ground_saturation"] = range_to_json(c.ground_saturation);
    j["ground_value"] = range_to_json(c.ground_value);
    j["noise_amplitude"] = range_to_json(c.noise_amplitude);
    j["noise_frequency"] = range_to_json(c.noise_frequency);
    j["noise_octaves_max"] = c.noise_octaves_max;
    j["pattern_scale"] = range_to_json(c.pattern_scale);
    j["distractor_max"] = c.distractor_max;
    j["distractor_size"] = range_to_json(c.distractor_size);
    j["distractor_spawn_halfwidth"] = c.distractor_spawn_halfwidth;
    j["distractor_corner_clearance"] = c.distractor_corner_clearance;
    j["ambient"] = range_to_json(c.ambient);
    j["directional_intensity"] = range_to_json(c.directional_intensity);
    j["light_elevation_deg"] = range_to_json(c.light_elevation_deg);
    j["environment_value"] = range_to_json(c.environment_value);
    j["camera_distance"] = range_to_json(c.camera_distance);
    j["camera_polar_max_deg"] = c.camera_polar_max_deg;
    j["camera_fov_deg"] = range_to_json(c.camera_fov_deg);
    return j;
}

inline GenConfig gen_config_from_json(const Json& j, const std::string& context = "generation") {
    GenConfig c;
    JsonReader r(j, context);
    r.get("resolution", c.resolution);
    r.get_range("towel_width", c.towel_width);
    r.get_range("towel_height", c.towel_height);
    r.get("workspace_halfwidth", c.workspace_halfwidth);
    r.get("corner_jitter_max", c.corner_jitter_max);
    r.get_range("wrinkle_amplitude", c.wrinkle_amplitude);
    r.get_range("wrinkle_frequency", c.wrinkle_frequency);
    r.get_range("towel_saturation", c.towel_saturation);
    r.get_range("towel_value", c.towel_value);
    r.get_range("ground_saturation", c.ground_saturation);
    r.get_range("ground_value", c.ground_value);
    r.get_range("noise_amplitude", c.noise_amplitude);
    r.get_range("noise_frequency", c.noise_frequency);
    r.get("noise_octaves_max", c.noise_octaves_max);
    r.get_range("pattern_scale", c.pattern_scale);
    r.get("distractor_max", c.distractor_max);
    r.get_range("distractor_size", c.distractor_size);
    r.get("distractor_spawn_halfwidth", c.distractor_spawn_halfwidth);
    r.get("distractor_corner_clearance", c.distractor_corner_clearance);
    r.get_range("ambient", c.ambient);
    r.get_range("directional_intensity", c.directional_intensity);
    r.get_range("light_elevation_deg", c.light_elevation_deg);
    r.get_range("environment_value", c.environment_value);
    r.get_range("camera_distance", c.camera_distance);
    r.get("camera_polar_max_deg", c.camera_polar_max_deg);
    r.get_range("camera_fov_deg", c.camera_fov_deg);
    r.finish();
    c.validate();
    return c;
}

inline Json model_spec_to_json(const nn::ModelSpec& s) {
    Json j;
    j["input_channels"] = s.input_channels;
    j["base_channels"] = s.base_channels;
    j["depth"] = s.depth;
    j["bottleneck_blocks"] = s.bottleneck_blocks;
    j["output_channels"] = s.output_channels;
    j["kernel"] = s.kernel;
    j["head_bias"] = s.head_bias;
    return j;
}

inline nn::ModelSpec model_spec_from_json(const Json& j, const std::string& context = "model") {
    nn::ModelSpec s;
    JsonReader r(j, context);
    r.get("input_channels", s.input_channels);
    r.get("base_channels", s.base_channels);
    r.get("depth", s.depth);
    r.get("bottleneck_blocks", s.bottleneck_blocks);
    r.get("output_channels", s.output_channels);
    r.get("kernel", s.kernel);
    r.get("head_bias", s.head_bias);
    r.finish();
    return s;
}

// Camera calibration file: pinhole intrinsics, camera-from-world pose and
// the table plane. Intrinsics are in pixels at the working resolution.
struct CameraCalibration {
    CameraModel camera;
    TablePlane plane;
};

inline Json calibration_to_json(const CameraCalibration& c) {
    Json j;
    j["fx"] = c.camera.fx;
    j["fy"] = c.camera.fy;
    j["cx"] = c.camera.cx;
    j["cy"] = c.camera.cy;
    j["rotation"] = c.camera.rotation.m;
    j["translation"] = Json::array(
        {c.camera.translation.x, c.camera.translation.y, c.camera.translation.z});
    j["plane"] = {
        {"point", Json::array({c.plane.point.x, c.plane.point.y, c.plane.point.z})},
        {"normal", Json::array({c.plane.normal.x, c.plane.normal.y, c.plane.normal.z})}};
    return j;
}

inline CameraCalibration calibration_from_json(const Json& j,
                                               const std::string& context = "calibration") {
    CameraCalibration c;
    JsonReader r(j, context);
    r.get("fx", c.camera.fx);
    r.get("fy", c.camera.fy);
    r.get("cx", c.camera.cx);
    r.get("cy", c.camera.cy);
    if (r.has("rotation")) {
        const Json& rot = r.sub("rotation");
        if (!rot.is_array() || rot.size() != 9)
            throw ConfigError(context + ".rotation: expected 9 row-major values");
        for (size_t i = 0; i < 9; ++i) c.camera.rotation.m[i] = rot[i].get<double>();
    }
    if (r.has("translation")) {
        const Json& t = r.sub("translation");
        if (!t.is_array() || t.size() != 3)
            throw ConfigError(context + ".translation: expected 3 values");
        c.camera.translation = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
    }
    if (r.has("plane")) {
        JsonReader p(r.sub("plane"), context + ".plane");
        if (p.has("point")) {
            const Json& pt = p.sub("point");
            c.plane.point = {pt.at(0).get<double>(), pt.at(1).get<double>(),
                             pt.at(2).get<double>()};
        }
        if (p.has("normal")) {
            const Json& n = p.sub("normal");
            c.plane.normal = Vec3{n.at(0).get<double>(), n.at(1).get<double>(),
                                  n.at(2).get<double>()}
                                 .normalized();
        }
        p.finish();
    }
    r.finish();
    if (c.camera.fx <= 0.0 || c.camera.fy <= 0.0)
        throw ConfigError(context + ": focal lengths must be positive");
    if (c.camera.rotation.orthonormality_error() > 1e-9)
        throw ConfigError(context + ": rotation is not orthonormal");
    return c;
}

}  // namespace foldkit
