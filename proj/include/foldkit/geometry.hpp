#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "foldkit/camera.hpp"
#include "foldkit/common.hpp"
#include "foldkit/vec.hpp"

namespace foldkit {

struct TablePlane {
    Vec3 point{0.0, 0.0, 0.0};
    Vec3 normal{0.0, 0.0, 1.0};  // unit
};

// Intersect the viewing ray of a pixel with the table plane.
inline Vec3 reproject_to_plane(const CameraModel& cam, const Vec2& px,
                               const TablePlane& plane) {
    const Ray ray = pixel_ray(cam, px);
    const double denom = ray.direction.dot(plane.normal);
    if (std::abs(denom) <= 1e-9)
        throw GeometryError("reproject_to_plane: ray nearly parallel to plane");
    const double s = (plane.point - ray.origin).dot(plane.normal) / denom;
    return ray.origin + s * ray.direction;
}

// Local frame attached to four reprojected towel corners.
//   - origin: corner centroid;
//   - ordered_corners: counter-clockwise viewed from +normal, starting at
//     the corner whose direction from the centroid is angularly closest to
//     a fixed in-plane reference (world +x projected onto the plane; ties
//     broken by distance to the plane anchor point);
//   - x_axis: direction of the first ordered side (the side the fold
//     planner grasps), z_axis: plane normal, y_axis: z cross x.
struct TowelFrame {
    Vec3 origin;
    Vec3 x_axis, y_axis, z_axis;
    std::array<Vec3, 4> ordered_corners;
};

namespace detail {

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * (b - a).cross(c - a).norm();
}

}  // namespace detail

inline constexpr double kCollinearAreaTol = 1e-6;  // m^2

// Build a TowelFrame directly from corners already in cyclic order
// (counter-clockwise viewed from +normal). Used by the planner tests and
// by oracle paths that know the ordering.
inline TowelFrame towel_frame_from_ordered(const std::array<Vec3, 4>& corners,
                                           const TablePlane& plane) {
    TowelFrame f;
    f.ordered_corners = corners;
    f.origin = (corners[0] + corners[1] + corners[2] + corners[3]) / 4.0;
    f.z_axis = plane.normal.normalized();
    Vec3 side = corners[1] - corners[0];
    side = side - f.z_axis * side.dot(f.z_axis);
    if (side.norm() < 1e-12)
        throw GeometryError("towel_frame: degenerate first side");
    f.x_axis = side.normalized();
    f.y_axis = f.z_axis.cross(f.x_axis);
    return f;
}

// Order four coplanar points and attach the local frame. Throws on
// collinear or duplicate corners (any corner triple with triangle area
// below kCollinearAreaTol).
inline TowelFrame towel_frame(const std::array<Vec3, 4>& corners,
                              const TablePlane& plane) {
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            for (int k = j + 1; k < 4; ++k)
                if (detail::triangle_area(corners[size_t(i)], corners[size_t(j)],
                                          corners[size_t(k)]) < kCollinearAreaTol)
                    throw GeometryError(
                        "towel_frame: corners nearly collinear (triangle " +
                        std::to_string(i) + "," + std::to_string(j) + "," +
                        std::to_string(k) + ")");

    const Vec3 n = plane.normal.normalized();
    std::array<Vec3, 4> flat;
    for (int i = 0; i < 4; ++i) {
        const Vec3& p = corners[size_t(i)];
        flat[size_t(i)] = p - n * (p - plane.point).dot(n);
    }

    // In-plane reference basis.
    Vec3 e1 = Vec3{1.0, 0.0, 0.0};
    e1 = e1 - n * e1.dot(n);
    if (e1.norm() < 1e-6) {
        e1 = Vec3{0.0, 1.0, 0.0};
        e1 = e1 - n * e1.dot(n);
    }
    e1 = e1.normalized();
    const Vec3 e2 = n.cross(e1);

    const Vec3 centroid = (flat[0] + flat[1] + flat[2] + flat[3]) / 4.0;
    std::array<int, 4> order{0, 1, 2, 3};
    std::array<double, 4> angle{};
    for (int i = 0; i < 4; ++i) {
        const Vec3 d = flat[size_t(i)] - centroid;
        angle[size_t(i)] = std::atan2(d.dot(e2), d.dot(e1));
    }
    std::sort(order.begin(), order.end(),
              [&angle](int a, int b) { return angle[size_t(a)] < angle[size_t(b)]; });

    // Start at the corner angularly closest to the reference direction.
    int start = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int s = 0; s < 4; ++s) {
        const int idx = order[size_t(s)];
        const double dist = std::abs(angle[size_t(idx)]);
        const double anchor = (flat[size_t(idx)] - plane.point).norm();
        if (dist < best - 1e-12 ||
            (std::abs(dist - best) <= 1e-12 &&
             anchor < (flat[size_t(order[size_t(start)])] - plane.point).norm())) {
            best = dist;
            start = s;
        }
    }

    std::array<Vec3, 4> ordered;
    for (int i = 0; i < 4; ++i)
        ordered[size_t(i)] = flat[size_t(order[size_t((start + i) % 4)])];
    return towel_frame_from_ordered(ordered, plane);
}

}  // namespace foldkit
