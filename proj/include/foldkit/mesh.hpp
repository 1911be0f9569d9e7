#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "foldkit/scene.hpp"
#include "foldkit/vec.hpp"

namespace foldkit {

struct Mesh {
    std::vector<Vec3> vertices;  // world space
    std::vector<std::array<int, 3>> triangles;

    void add_triangle(int a, int b, int c) { triangles.push_back({a, b, c}); }
};

// Large finite quad standing in for the infinite table plane.
inline Mesh make_ground_mesh(double half_extent = 3.0) {
    Mesh m;
    m.vertices = {{-half_extent, -half_extent, 0.0},
                  {half_extent, -half_extent, 0.0},
                  {half_extent, half_extent, 0.0},
                  {-half_extent, half_extent, 0.0}};
    m.add_triangle(0, 1, 2);
    m.add_triangle(0, 2, 3);
    return m;
}

// Towel as a grid over the (possibly jittered) quadrilateral, displaced by
// the wrinkle heightfield. The four grid corners coincide exactly with
// TowelGeometry::corners_3d(), which is what the annotations use.
inline Mesh make_towel_mesh(const TowelGeometry& towel, int grid = 12) {
    Mesh m;
    const int n = grid + 1;
    m.vertices.reserve(static_cast<size_t>(n) * static_cast<size_t>(n));
    std::array<Vec2, 4> locals;
    for (int i = 0; i < 4; ++i) locals[size_t(i)] = towel.local_corner(i);
    for (int gy = 0; gy < n; ++gy) {
        const double t = static_cast<double>(gy) / grid;
        for (int gx = 0; gx < n; ++gx) {
            const double s = static_cast<double>(gx) / grid;
            // Bilinear blend of the four local corners.
            const Vec2 local = locals[0] * ((1 - s) * (1 - t)) + locals[1] * (s * (1 - t)) +
                               locals[2] * (s * t) + locals[3] * ((1 - s) * t);
            const Vec2 xy = towel.local_to_world_xy(local);
            m.vertices.push_back({xy.x, xy.y, towel.height_at(local)});
        }
    }
    for (int gy = 0; gy < grid; ++gy) {
        for (int gx = 0; gx < grid; ++gx) {
            const int a = gy * n + gx;
            const int b = a + 1;
            const int c = a + n;
            const int d = c + 1;
            m.add_triangle(a, b, d);
            m.add_triangle(a, d, c);
        }
    }
    return m;
}

namespace detail {

inline Vec3 posed(const Vec2& position, double yaw, const Vec3& local) {
    const double c = std::cos(yaw), s = std::sin(yaw);
    return {position.x + c * local.x - s * local.y,
            position.y + s * local.x + c * local.y, local.z};
}

}  // namespace detail

// Box with extents (sx, sy, sz), base resting on the table.
inline Mesh make_box_mesh(const Vec2& position, double yaw, const Vec3& extents) {
    Mesh m;
    const double hx = extents.x * 0.5, hy = extents.y * 0.5;
    for (int corner = 0; corner < 8; ++corner) {
        const double x = (corner & 1) ? hx : -hx;
        const double y = (corner & 2) ? hy : -hy;
        const double z = (corner & 4) ? extents.z : 0.0;
        m.vertices.push_back(detail::posed(position, yaw, {x, y, z}));
    }
    const int faces[6][4] = {{0, 1, 3, 2}, {4, 6, 7, 5}, {0, 4, 5, 1},
                             {2, 3, 7, 6}, {0, 2, 6, 4}, {1, 5, 7, 3}};
    for (const auto& f : faces) {
        m.add_triangle(f[0], f[1], f[2]);
        m.add_triangle(f[0], f[2], f[3]);
    }
    return m;
}

// UV sphere resting on the table.
inline Mesh make_sphere_mesh(const Vec2& position, double radius, int slices = 12,
                             int stacks = 8) {
    Mesh m;
    for (int st = 0; st <= stacks; ++st) {
        const double phi = kPi * st / stacks;  // 0 at top
        for (int sl = 0; sl < slices; ++sl) {
            const double theta = 2.0 * kPi * sl / slices;
            m.vertices.push_back({position.x + radius * std::sin(phi) * std::cos(theta),
                                  position.y + radius * std::sin(phi) * std::sin(theta),
                                  radius + radius * std::cos(phi)});
        }
    }
    auto idx = [slices](int st, int sl) { return st * slices + (sl % slices); };
    for (int st = 0; st < stacks; ++st) {
        for (int sl = 0; sl < slices; ++sl) {
            m.add_triangle(idx(st, sl), idx(st + 1, sl), idx(st + 1, sl + 1));
            m.add_triangle(idx(st, sl), idx(st + 1, sl + 1), idx(st, sl + 1));
        }
    }
    return m;
}

// Closed cylinder resting on the table.
inline Mesh make_cylinder_mesh(const Vec2& position, double yaw, double radius,
                               double height, int slices = 12) {
    Mesh m;
    for (int ring = 0; ring < 2; ++ring) {
        const double z = ring ? height : 0.0;
        for (int sl = 0; sl < slices; ++sl) {
            const double theta = 2.0 * kPi * sl / slices;
            m.vertices.push_back(detail::posed(
                position, yaw, {radius * std::cos(theta), radius * std::sin(theta), z}));
        }
    }
    const int base_center = static_cast<int>(m.vertices.size());
    m.vertices.push_back(detail::posed(position, yaw, {0.0, 0.0, 0.0}));
    const int top_center = base_center + 1;
    m.vertices.push_back(detail::posed(position, yaw, {0.0, 0.0, height}));
    auto lo = [slices](int sl) { return sl % slices; };
    auto hi = [slices](int sl) { return slices + (sl % slices); };
    for (int sl = 0; sl < slices; ++sl) {
        m.add_triangle(lo(sl), lo(sl + 1), hi(sl + 1));
        m.add_triangle(lo(sl), hi(sl + 1), hi(sl));
        m.add_triangle(base_center, lo(sl + 1), lo(sl));
        m.add_triangle(top_center, hi(sl), hi(sl + 1));
    }
    return m;
}

inline Mesh make_distractor_mesh(const Distractor& d) {
    switch (d.shape) {
        case DistractorShape::box: return make_box_mesh(d.position, d.yaw, d.size);
        case DistractorShape::sphere: return make_sphere_mesh(d.position, d.size.x);
        case DistractorShape::cylinder:
            return make_cylinder_mesh(d.position, d.yaw, d.size.x, d.size.z);
    }
    return {};
}

}  // namespace foldkit
