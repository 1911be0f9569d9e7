#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "foldkit/annotation.hpp"
#include "foldkit/camera.hpp"
#include "foldkit/image.hpp"
#include "foldkit/mesh.hpp"
#include "foldkit/perlin.hpp"
#include "foldkit/scene.hpp"

namespace foldkit {

// Object ids in the framebuffer.
inline constexpr int32_t kBackgroundId = -1;
inline constexpr int32_t kGroundId = 0;
inline constexpr int32_t kTowelId = 1;
inline constexpr int32_t kDistractorBaseId = 2;

struct Framebuffer {
    int width = 0;
    int height = 0;
    std::vector<float> color;     // 3 per pixel
    std::vector<double> depth;    // camera-space z
    std::vector<int32_t> object_id;

    Framebuffer(int w, int h)
        : width(w),
          height(h),
          color(size_t(3) * size_t(w) * size_t(h), 0.0f),
          depth(size_t(w) * size_t(h), std::numeric_limits<double>::infinity()),
          object_id(size_t(w) * size_t(h), kBackgroundId) {}

    double depth_at(int u, int v) const { return depth[size_t(v) * size_t(width) + size_t(u)]; }
    int32_t id_at(int u, int v) const { return object_id[size_t(v) * size_t(width) + size_t(u)]; }
};

struct RasterizeOptions {
    bool ground = true;
    bool towel = true;
    bool distractors = true;
    bool shade = true;  // depth/id only when false
};

namespace detail {

// 2D parameterization of a surface for procedural materials.
struct SurfaceParam {
    Vec3 origin{};
    Vec3 axis_u{1.0, 0.0, 0.0};
    Vec3 axis_v{0.0, 1.0, 0.0};

    Vec2 local_of(const Vec3& p) const {
        const Vec3 d = p - origin;
        return {d.dot(axis_u), d.dot(axis_v)};
    }
};

inline Vec3 material_albedo(const ProceduralMaterial& m, const PerlinNoise& noise,
                            const Vec2& local) {
    Vec3 base = hsv_to_rgb(m.base_hsv);
    if (m.pattern != GroundPattern::none) {
        const auto kx = static_cast<int64_t>(std::floor(local.x / m.pattern_scale));
        const auto ky = static_cast<int64_t>(std::floor(local.y / m.pattern_scale));
        const int64_t parity =
            m.pattern == GroundPattern::stripes ? (kx & 1) : ((kx + ky) & 1);
        if (parity) base = hsv_to_rgb(m.secondary_hsv);
    }
    const double mod = 1.0 + noise.at(local);
    return {std::clamp(base.x * mod, 0.0, 1.0), std::clamp(base.y * mod, 0.0, 1.0),
            std::clamp(base.z * mod, 0.0, 1.0)};
}

struct ClipVertex {
    Vec3 cam;    // camera-space position
    Vec3 world;  // carried for shading
};

inline constexpr double kNearPlane = 1e-3;

// Clip a camera-space triangle against z >= kNearPlane; returns a convex
// polygon of 0..4 vertices.
inline int clip_near(const ClipVertex in[3], ClipVertex out[4]) {
    int n = 0;
    for (int i = 0; i < 3; ++i) {
        const ClipVertex& a = in[i];
        const ClipVertex& b = in[(i + 1) % 3];
        const bool a_in = a.cam.z >= kNearPlane;
        const bool b_in = b.cam.z >= kNearPlane;
        if (a_in) out[n++] = a;
        if (a_in != b_in) {
            const double t = (kNearPlane - a.cam.z) / (b.cam.z - a.cam.z);
            out[n++] = {a.cam + t * (b.cam - a.cam), a.world + t * (b.world - a.world)};
        }
    }
    return n;
}

struct SceneObject {
    Mesh mesh;
    int32_t id;
    const ProceduralMaterial* material;
    SurfaceParam param;
};

inline double edge(const Vec2& a, const Vec2& b, const Vec2& p) {
    return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
}

inline void raster_object(Framebuffer& fb, const SceneObject& obj, const CameraModel& cam,
                          const LightingSpec& light, bool shade) {
    const Vec3 eye = cam.position();
    const PerlinNoise noise(obj.material->noise);
    const Vec3 to_light = -light.light_direction.normalized();

    for (const auto& tri : obj.mesh.triangles) {
        const Vec3& w0 = obj.mesh.vertices[size_t(tri[0])];
        const Vec3& w1 = obj.mesh.vertices[size_t(tri[1])];
        const Vec3& w2 = obj.mesh.vertices[size_t(tri[2])];
        Vec3 normal = (w1 - w0).cross(w2 - w0);
        const double nlen = normal.norm();
        if (nlen < 1e-15) continue;
        normal = normal / nlen;
        // One-sided shading: orient the normal toward the camera.
        if (normal.dot(eye - (w0 + w1 + w2) / 3.0) < 0.0) normal = -normal;
        const double diffuse = std::max(0.0, normal.dot(to_light));
        const double intensity = light.ambient + light.directional_intensity * diffuse;

        const ClipVertex cv[3] = {{cam.world_to_camera(w0), w0},
                                  {cam.world_to_camera(w1), w1},
                                  {cam.world_to_camera(w2), w2}};
        ClipVertex poly[4];
        const int n = clip_near(cv, poly);
        for (int k = 2; k < n; ++k) {
            const ClipVertex* v[3] = {&poly[0], &poly[k - 1], &poly[k]};
            Vec2 p[3];
            double z[3];
            Vec3 world_over_z[3];
            for (int i = 0; i < 3; ++i) {
                z[i] = v[i]->cam.z;
                p[i] = {cam.fx * v[i]->cam.x / z[i] + cam.cx,
                        cam.fy * v[i]->cam.y / z[i] + cam.cy};
                world_over_z[i] = v[i]->world / z[i];
            }
            double area = edge(p[0], p[1], p[2]);
            if (area == 0.0) continue;
            if (area < 0.0) {
                std::swap(p[1], p[2]);
                std::swap(z[1], z[2]);
                std::swap(world_over_z[1], world_over_z[2]);
                area = -area;
            }
            const int u0 = std::max(0, int(std::ceil(std::min({p[0].x, p[1].x, p[2].x}))));
            const int u1 = std::min(fb.width - 1,
                                    int(std::floor(std::max({p[0].x, p[1].x, p[2].x}))));
            const int v0 = std::max(0, int(std::ceil(std::min({p[0].y, p[1].y, p[2].y}))));
            const int v1 = std::min(fb.height - 1,
                                    int(std::floor(std::max({p[0].y, p[1].y, p[2].y}))));
            for (int py = v0; py <= v1; ++py) {
                for (int px = u0; px <= u1; ++px) {
                    const Vec2 s{double(px), double(py)};
                    const double e0 = edge(p[1], p[2], s);
                    const double e1 = edge(p[2], p[0], s);
                    const double e2 = edge(p[0], p[1], s);
                    if (e0 < 0.0 || e1 < 0.0 || e2 < 0.0) continue;
                    const double l0 = e0 / area, l1 = e1 / area, l2 = e2 / area;
                    const double inv_z = l0 / z[0] + l1 / z[1] + l2 / z[2];
                    const double depth = 1.0 / inv_z;
                    const size_t idx = size_t(py) * size_t(fb.width) + size_t(px);
                    if (depth >= fb.depth[idx]) continue;
                    fb.depth[idx] = depth;
                    fb.object_id[idx] = obj.id;
                    if (!shade) continue;
                    const Vec3 world =
                        (world_over_z[0] * l0 + world_over_z[1] * l1 + world_over_z[2] * l2) *
                        depth;
                    const Vec3 albedo =
                        material_albedo(*obj.material, noise, obj.param.local_of(world));
                    fb.color[3 * idx + 0] = static_cast<float>(std::clamp(
                        albedo.x * intensity + light.environment_color.x, 0.0, 1.0));
                    fb.color[3 * idx + 1] = static_cast<float>(std::clamp(
                        albedo.y * intensity + light.environment_color.y, 0.0, 1.0));
                    fb.color[3 * idx + 2] = static_cast<float>(std::clamp(
                        albedo.z * intensity + light.environment_color.z, 0.0, 1.0));
                }
            }
        }
    }
}

inline SurfaceParam towel_param(const TowelGeometry& t) {
    const double c = std::cos(t.yaw), s = std::sin(t.yaw);
    return {{t.center.x, t.center.y, 0.0}, {c, s, 0.0}, {-s, c, 0.0}};
}

inline SurfaceParam distractor_param(const Distractor& d) {
    const double c = std::cos(d.yaw), s = std::sin(d.yaw);
    // Mix a little z into the axes so vertical faces get texture variation.
    return {{d.position.x, d.position.y, 0.0}, {c, s, 0.5}, {-s, c, -0.5}};
}

}  // namespace detail

// Camera adjusted to the requested output resolution.
inline CameraModel camera_for_resolution(const SceneSpec& scene, int resolution) {
    if (resolution == scene.resolution) return scene.camera;
    return scene.camera.scaled(static_cast<double>(resolution) / scene.resolution);
}

// Z-buffered rasterization of the scene into color/depth/id buffers.
inline Framebuffer rasterize_scene(const SceneSpec& scene, int resolution,
                                   const RasterizeOptions& opt = {}) {
    if (resolution < 32) throw ArgumentError("rasterize_scene: resolution must be >= 32");
    const CameraModel cam = camera_for_resolution(scene, resolution);
    if (cam.world_to_camera({0.0, 0.0, 0.0}).z <= 0.0)
        throw RenderError("rasterize_scene: scene center behind camera");

    Framebuffer fb(resolution, resolution);
    if (opt.shade) {
        const Vec3& env = scene.lighting.environment_color;
        for (size_t i = 0; i < fb.depth.size(); ++i) {
            fb.color[3 * i + 0] = static_cast<float>(std::clamp(env.x, 0.0, 1.0));
            fb.color[3 * i + 1] = static_cast<float>(std::clamp(env.y, 0.0, 1.0));
            fb.color[3 * i + 2] = static_cast<float>(std::clamp(env.z, 0.0, 1.0));
        }
    }

    std::vector<detail::SceneObject> objects;
    if (opt.ground)
        objects.push_back({make_ground_mesh(), kGroundId, &scene.ground_material, {}});
    if (opt.towel)
        objects.push_back({make_towel_mesh(scene.towel), kTowelId, &scene.towel_material,
                           detail::towel_param(scene.towel)});
    if (opt.distractors)
        for (size_t i = 0; i < scene.distractors.size(); ++i)
            objects.push_back({make_distractor_mesh(scene.distractors[i]),
                               kDistractorBaseId + static_cast<int32_t>(i),
                               &scene.distractors[i].material,
                               detail::distractor_param(scene.distractors[i])});

    for (const auto& obj : objects)
        detail::raster_object(fb, obj, cam, scene.lighting, opt.shade);
    return fb;
}

inline Image image_from_framebuffer(const Framebuffer& fb) {
    Image img(fb.width, fb.height);
    img.rgb = fb.color;
    return img;
}

// Render to an RGB image (deterministic per (scene, resolution)).
inline Image render_scene(const SceneSpec& scene, int resolution) {
    return image_from_framebuffer(rasterize_scene(scene, resolution));
}

// Project the towel corners and decide visibility: a corner is visible when
// it projects inside the frame (0 <= u <= W-1, 0 <= v <= H-1, pixel centers
// at integer coordinates) and no distractor fragment is nearer than the
// corner at the corner's pixel.
inline KeypointAnnotation annotate_corners(const SceneSpec& scene, int resolution) {
    const CameraModel cam = camera_for_resolution(scene, resolution);
    KeypointAnnotation ann;
    const auto corners = scene.towel.corners_3d();

    Framebuffer occluders(1, 1);
    bool have_occluders = false;
    if (!scene.distractors.empty()) {
        RasterizeOptions opt;
        opt.ground = false;
        opt.towel = false;
        opt.shade = false;
        occluders = rasterize_scene(scene, resolution, opt);
        have_occluders = true;
    }

    for (int i = 0; i < 4; ++i) {
        const Vec3 pc = cam.world_to_camera(corners[size_t(i)]);
        if (pc.z <= 1e-9) {
            ann.corners_px[size_t(i)] = {0.0, 0.0};
            ann.visible[size_t(i)] = false;
            continue;
        }
        const Vec2 px{cam.fx * pc.x / pc.z + cam.cx, cam.fy * pc.y / pc.z + cam.cy};
        ann.corners_px[size_t(i)] = px;
        bool visible = px.x >= 0.0 && px.x <= resolution - 1.0 && px.y >= 0.0 &&
                       px.y <= resolution - 1.0;
        if (visible && have_occluders) {
            const int iu = static_cast<int>(std::lround(px.x));
            const int iv = static_cast<int>(std::lround(px.y));
            if (occluders.depth_at(iu, iv) < pc.z - 1e-9) visible = false;
        }
        ann.visible[size_t(i)] = visible;
    }
    return ann;
}

}  // namespace foldkit
