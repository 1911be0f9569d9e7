#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "foldkit/camera.hpp"
#include "foldkit/common.hpp"
#include "foldkit/perlin.hpp"
#include "foldkit/rng.hpp"
#include "foldkit/vec.hpp"

namespace foldkit {

// Towels sit a hair above the table so coplanar fragments never fight the
// ground in the z-buffer; 0.05 mm is far below annotation noise.
inline constexpr double kClothLift = 5e-5;

inline Vec3 hsv_to_rgb(const Vec3& hsv) {
    const double h = hsv.x - std::floor(hsv.x);
    const double s = std::clamp(hsv.y, 0.0, 1.0);
    const double v = std::clamp(hsv.z, 0.0, 1.0);
    const double h6 = h * 6.0;
    const int sector = static_cast<int>(h6) % 6;
    const double f = h6 - std::floor(h6);
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    switch (sector) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

enum class GroundPattern { none, stripes, checker };

struct ProceduralMaterial {
    Vec3 base_hsv{0.0, 0.0, 0.5};
    PerlinParams noise;  // amplitude acts as modulation depth around 1
    GroundPattern pattern = GroundPattern::none;
    double pattern_scale = 0.1;  // meters
    Vec3 secondary_hsv{0.0, 0.0, 0.5};
};

// Rectangular towel lying on the table. The rectangle (width x height) is
// posed by (center, yaw); per-corner in-plane jitter and a low-amplitude
// wrinkle heightfield model a towel that is unfolded but not perfectly
// flattened. Corner winding is fixed: counter-clockwise in the towel frame
// starting at the (-w/2, -h/2) corner.
struct TowelGeometry {
    double width = 0.3;
    double height = 0.3;
    Vec2 center{0.0, 0.0};
    double yaw = 0.0;
    std::array<Vec2, 4> corner_jitter{};
    double wrinkle_amplitude = 0.0;  // meters
    double wrinkle_frequency = 5.0;  // cells per meter
    uint64_t wrinkle_seed = 0;

    // Corner positions in the towel-local frame (before pose), jitter
    // applied.
    Vec2 local_corner(int i) const {
        static constexpr double sx[4] = {-0.5, 0.5, 0.5, -0.5};
        static constexpr double sy[4] = {-0.5, -0.5, 0.5, 0.5};
        return Vec2{sx[i] * width, sy[i] * height} + corner_jitter[size_t(i)];
    }

    Vec2 local_to_world_xy(const Vec2& local) const {
        const double c = std::cos(yaw), s = std::sin(yaw);
        return {center.x + c * local.x - s * local.y,
                center.y + s * local.x + c * local.y};
    }

    // Wrinkle height above the table at a towel-local point; in
    // [kClothLift, kClothLift + amplitude].
    double height_at(const Vec2& local) const {
        if (wrinkle_amplitude <= 0.0) return kClothLift;
        PerlinParams pp;
        pp.octaves = 2;
        pp.frequency = wrinkle_frequency;
        pp.seed = wrinkle_seed;
        const PerlinNoise noise(pp);
        const double f = wrinkle_frequency * 0.5;
        const double sinusoid = std::sin(2.0 * 3.14159265358979 * f * (local.x + 0.37)) *
                                std::sin(2.0 * 3.14159265358979 * f * (local.y + 0.73));
        const double blend = 0.6 * noise.at(local) + 0.4 * sinusoid;
        return kClothLift + 0.5 * wrinkle_amplitude * (1.0 + blend);
    }

    std::array<Vec3, 4> corners_3d() const {
        std::array<Vec3, 4> out;
        for (int i = 0; i < 4; ++i) {
            const Vec2 local = local_corner(i);
            const Vec2 xy = local_to_world_xy(local);
            out[size_t(i)] = {xy.x, xy.y, height_at(local)};
        }
        return out;
    }
};

enum class DistractorShape { box, sphere, cylinder };

struct Distractor {
    DistractorShape shape = DistractorShape::box;
    Vec2 position{0.0, 0.0};
    double yaw = 0.0;
    Vec3 size{0.05, 0.05, 0.05};  // box extents; sphere: x=radius; cylinder: x=radius, z=height
    ProceduralMaterial material;

    double footprint_radius() const {
        switch (shape) {
            case DistractorShape::box: return 0.5 * std::hypot(size.x, size.y);
            case DistractorShape::sphere: return size.x;
            case DistractorShape::cylinder: return size.x;
        }
        return size.x;
    }
};

struct LightingSpec {
    double ambient = 0.3;
    Vec3 light_direction{0.0, 0.0, -1.0};  // direction the light travels, unit
    double directional_intensity = 0.7;
    Vec3 environment_color{0.05, 0.05, 0.05};  // additive floor and background
};

// Full randomized description of one synthetic scene.
struct SceneSpec {
    int resolution = 128;  // native resolution the camera intrinsics refer to
    TowelGeometry towel;
    ProceduralMaterial towel_material;
    ProceduralMaterial ground_material;
    std::vector<Distractor> distractors;  // at most 5
    LightingSpec lighting;
    CameraModel camera;
    uint64_t seed = 0;
};

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

// Camera sampling region: a spherical cap around the scene center, plus the
// intrinsics range for the pinhole camera pointed at the center.
struct CameraCapParams {
    Vec3 center{0.0, 0.0, 0.0};
    Range distance{1.0, 1.5};
    double polar_max_deg = 35.0;
    Range fov_deg{55.0, 70.0};
    int resolution = 128;
};

// All sampling ranges for scene generation. Every field has a default; the
// paper-style randomization axes (geometry, materials, lighting, camera)
// are each covered by one group below.
struct GenConfig {
    int resolution = 128;

    Range towel_width{0.2, 0.5};
    Range towel_height{0.2, 0.5};
    double workspace_halfwidth = 0.08;  // towel center offset from scene center
    double corner_jitter_max = 0.003;
    Range wrinkle_amplitude{0.0, 0.01};
    Range wrinkle_frequency{3.0, 8.0};

    Range towel_saturation{0.15, 0.95};
    Range towel_value{0.25, 0.95};
    Range ground_saturation{0.0, 0.9};
    Range ground_value{0.1, 0.9};
    Range noise_amplitude{0.1, 0.5};
    Range noise_frequency{2.0, 12.0};
    int noise_octaves_max = 3;
    Range pattern_scale{0.04, 0.25};

    int distractor_max = 5;
    Range distractor_size{0.03, 0.12};
    double distractor_spawn_halfwidth = 0.35;
    // Distractors resample their position a few times to keep their
    // footprint away from towel corners; keeps occlusion aborts rare while
    // still cluttering the scene.
    double distractor_corner_clearance = 0.03;

    Range ambient{0.15, 0.45};
    Range directional_intensity{0.4, 1.0};
    Range light_elevation_deg{30.0, 90.0};
    Range environment_value{0.0, 0.25};

    // The working view keeps the towel large in frame, mirroring a rig
    // image cropped to the relevant table area.
    Range camera_distance{0.85, 1.25};
    double camera_polar_max_deg = 35.0;
    Range camera_fov_deg{50.0, 65.0};

    void validate() const {
        auto check = [](const Range& r, const char* name) {
            if (!(r.lo <= r.hi))
                throw ConfigError(std::string("gen config: range '") + name +
                                  "' has min > max");
        };
        if (resolution < 32) throw ConfigError("gen config: 'resolution' must be >= 32");
        check(towel_width, "towel_width");
        check(towel_height, "towel_height");
        if (towel_width.lo <= 0.0 || towel_height.lo <= 0.0)
            throw ConfigError("gen config: 'towel_width'/'towel_height' must be positive");
        if (workspace_halfwidth < 0.0)
            throw ConfigError("gen config: 'workspace_halfwidth' must be >= 0");
        if (corner_jitter_max < 0.0)
            throw ConfigError("gen config: 'corner_jitter_max' must be >= 0");
        check(wrinkle_amplitude, "wrinkle_amplitude");
        check(wrinkle_frequency, "wrinkle_frequency");
        check(towel_saturation, "towel_saturation");
        check(towel_value, "towel_value");
        check(ground_saturation, "ground_saturation");
        check(ground_value, "ground_value");
        check(noise_amplitude, "noise_amplitude");
        check(noise_frequency, "noise_frequency");
        if (noise_octaves_max < 1)
            throw ConfigError("gen config: 'noise_octaves_max' must be >= 1");
        check(pattern_scale, "pattern_scale");
        if (pattern_scale.lo <= 0.0)
            throw ConfigError("gen config: 'pattern_scale' must be positive");
        if (distractor_max < 0 || distractor_max > 5)
            throw ConfigError("gen config: 'distractor_max' must be in [0,5]");
        check(distractor_size, "distractor_size");
        check(ambient, "ambient");
        check(directional_intensity, "directional_intensity");
        check(light_elevation_deg, "light_elevation_deg");
        check(environment_value, "environment_value");
        check(camera_distance, "camera_distance");
        if (camera_distance.lo <= 0.0)
            throw ConfigError("gen config: 'camera_distance' must be positive");
        if (camera_polar_max_deg < 0.0 || camera_polar_max_deg > 90.0)
            throw ConfigError("gen config: 'camera_polar_max_deg' must be in [0,90]");
        check(camera_fov_deg, "camera_fov_deg");
        if (camera_fov_deg.lo <= 0.0 || camera_fov_deg.hi >= 180.0)
            throw ConfigError("gen config: 'camera_fov_deg' must be in (0,180)");
    }

    CameraCapParams camera_cap() const {
        CameraCapParams cap;
        cap.distance = camera_distance;
        cap.polar_max_deg = camera_polar_max_deg;
        cap.fov_deg = camera_fov_deg;
        cap.resolution = resolution;
        return cap;
    }
};

inline constexpr double kPi = 3.14159265358979323846;

// Sample a camera position uniformly on the spherical cap (area-uniform in
// solid angle, uniform in distance) looking at the cap center.
inline CameraModel sample_camera_pose(const CameraCapParams& cap, RandomStream& rng) {
    if (!(cap.distance.lo <= cap.distance.hi) || cap.distance.lo <= 0.0)
        throw ConfigError("camera cap: invalid distance range");
    if (cap.polar_max_deg < 0.0 || cap.polar_max_deg > 90.0)
        throw ConfigError("camera cap: polar max must be in [0,90] degrees");
    const double r = rng.uniform(cap.distance.lo, cap.distance.hi);
    const double cos_max = std::cos(cap.polar_max_deg * kPi / 180.0);
    const double cos_theta = rng.uniform(cos_max, 1.0);
    const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
    const double azimuth = rng.uniform(0.0, 2.0 * kPi);
    const Vec3 eye = cap.center + Vec3{r * sin_theta * std::cos(azimuth),
                                       r * sin_theta * std::sin(azimuth), r * cos_theta};
    const double fov = rng.uniform(cap.fov_deg.lo, cap.fov_deg.hi) * kPi / 180.0;
    const double f = 0.5 * cap.resolution / std::tan(0.5 * fov);
    const double c = (cap.resolution - 1) * 0.5;
    return look_at(eye, cap.center, f, f, c, c);
}

namespace detail {

inline ProceduralMaterial sample_material(RandomStream& rng, const GenConfig& cfg,
                                          const Range& sat, const Range& val,
                                          bool allow_pattern) {
    ProceduralMaterial m;
    m.base_hsv = {rng.uniform(), rng.uniform(sat.lo, sat.hi), rng.uniform(val.lo, val.hi)};
    m.noise.octaves = 1 + static_cast<int>(rng.uniform_int(
                              static_cast<uint64_t>(cfg.noise_octaves_max)));
    m.noise.frequency = rng.uniform(cfg.noise_frequency.lo, cfg.noise_frequency.hi);
    m.noise.amplitude = rng.uniform(cfg.noise_amplitude.lo, cfg.noise_amplitude.hi);
    m.noise.seed = rng.next_u64();
    if (allow_pattern) {
        m.pattern = static_cast<GroundPattern>(rng.uniform_int(3));
        m.pattern_scale = rng.uniform(cfg.pattern_scale.lo, cfg.pattern_scale.hi);
        m.secondary_hsv = {rng.uniform(), rng.uniform(sat.lo, sat.hi),
                           rng.uniform(val.lo, val.hi)};
    }
    return m;
}

}  // namespace detail

// Deterministic scene sampler: identical (seed, config) pairs produce
// bit-identical SceneSpecs.
inline SceneSpec sample_scene(uint64_t seed, const GenConfig& cfg) {
    cfg.validate();
    RandomStream rng(seed);
    SceneSpec scene;
    scene.seed = seed;
    scene.resolution = cfg.resolution;

    TowelGeometry& towel = scene.towel;
    towel.width = rng.uniform(cfg.towel_width.lo, cfg.towel_width.hi);
    towel.height = rng.uniform(cfg.towel_height.lo, cfg.towel_height.hi);
    towel.center = {rng.uniform(-cfg.workspace_halfwidth, cfg.workspace_halfwidth),
                    rng.uniform(-cfg.workspace_halfwidth, cfg.workspace_halfwidth)};
    towel.yaw = rng.uniform(0.0, 2.0 * kPi);
    for (auto& j : towel.corner_jitter)
        j = {rng.uniform(-cfg.corner_jitter_max, cfg.corner_jitter_max),
             rng.uniform(-cfg.corner_jitter_max, cfg.corner_jitter_max)};
    towel.wrinkle_amplitude = rng.uniform(cfg.wrinkle_amplitude.lo, cfg.wrinkle_amplitude.hi);
    towel.wrinkle_frequency = rng.uniform(cfg.wrinkle_frequency.lo, cfg.wrinkle_frequency.hi);
    towel.wrinkle_seed = rng.next_u64();

    scene.towel_material =
        detail::sample_material(rng, cfg, cfg.towel_saturation, cfg.towel_value, false);
    scene.ground_material =
        detail::sample_material(rng, cfg, cfg.ground_saturation, cfg.ground_value, true);

    LightingSpec& light = scene.lighting;
    light.ambient = rng.uniform(cfg.ambient.lo, cfg.ambient.hi);
    const double elevation =
        rng.uniform(cfg.light_elevation_deg.lo, cfg.light_elevation_deg.hi) * kPi / 180.0;
    const double light_az = rng.uniform(0.0, 2.0 * kPi);
    light.light_direction = Vec3{-std::cos(elevation) * std::cos(light_az),
                                 -std::cos(elevation) * std::sin(light_az),
                                 -std::sin(elevation)}
                                .normalized();
    light.directional_intensity =
        rng.uniform(cfg.directional_intensity.lo, cfg.directional_intensity.hi);
    light.environment_color = hsv_to_rgb(
        {rng.uniform(), rng.uniform(0.0, 0.6),
         rng.uniform(cfg.environment_value.lo, cfg.environment_value.hi)});

    const auto corners = towel.corners_3d();
    const auto n_distractors = rng.uniform_int(static_cast<uint64_t>(cfg.distractor_max) + 1);
    for (uint64_t d = 0; d < n_distractors; ++d) {
        Distractor obj;
        obj.shape = static_cast<DistractorShape>(rng.uniform_int(3));
        const double sx = rng.uniform(cfg.distractor_size.lo, cfg.distractor_size.hi);
        const double sy = rng.uniform(cfg.distractor_size.lo, cfg.distractor_size.hi);
        const double sz = rng.uniform(cfg.distractor_size.lo, cfg.distractor_size.hi);
        obj.size = {sx, sy, sz};
        obj.yaw = rng.uniform(0.0, 2.0 * kPi);
        obj.material = detail::sample_material(rng, cfg, cfg.ground_saturation,
                                               cfg.ground_value, false);
        // Keep the footprint away from towel corners; give up after a few
        // tries rather than bias the distractor count.
        Vec2 pos{};
        for (int attempt = 0; attempt < 20; ++attempt) {
            pos = {rng.uniform(-cfg.distractor_spawn_halfwidth, cfg.distractor_spawn_halfwidth),
                   rng.uniform(-cfg.distractor_spawn_halfwidth, cfg.distractor_spawn_halfwidth)};
            const double min_clear = obj.footprint_radius() + cfg.distractor_corner_clearance;
            bool clear = true;
            for (const Vec3& c : corners)
                if ((c.xy() - pos).norm() < min_clear) clear = false;
            if (clear) break;
        }
        obj.position = pos;
        scene.distractors.push_back(obj);
    }

    scene.camera = sample_camera_pose(cfg.camera_cap(), rng);
    return scene;
}

}  // namespace foldkit
