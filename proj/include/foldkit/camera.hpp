#pragma once

#include <cmath>

#include "foldkit/common.hpp"
#include "foldkit/vec.hpp"

namespace foldkit {

// Pinhole camera. Conventions, used consistently everywhere:
//   - camera frame: +z forward (viewing direction), +x right, +y down;
//   - image coordinates: u right, v down, pixel (ix,iy) sampled at the
//     continuous point (ix, iy), so the principal point of a WxH image
//     defaults to ((W-1)/2, (H-1)/2);
//   - pose is camera-from-world: p_cam = R * p_world + t.
struct CameraModel {
    double fx = 1.0, fy = 1.0;  // focal lengths, pixels
    double cx = 0.0, cy = 0.0;  // principal point, pixels
    Mat3 rotation;              // camera-from-world
    Vec3 translation;

    Vec3 world_to_camera(const Vec3& p) const { return rotation * p + translation; }

    Vec3 position() const { return rotation.transposed() * (-translation); }

    Vec3 forward_axis() const { return rotation.row(2); }

    // Camera scaled to a different output resolution; intrinsics scale
    // linearly with image size.
    CameraModel scaled(double factor) const {
        CameraModel c = *this;
        c.fx *= factor;
        c.fy *= factor;
        c.cx = (c.cx + 0.5) * factor - 0.5;
        c.cy = (c.cy + 0.5) * factor - 0.5;
        return c;
    }
};

// Perspective projection of a world point to pixel coordinates.
inline Vec2 project(const CameraModel& cam, const Vec3& p) {
    const Vec3 pc = cam.world_to_camera(p);
    if (pc.z <= 1e-12)
        throw GeometryError("project: point behind camera (z = " +
                            std::to_string(pc.z) + ")");
    return {cam.fx * pc.x / pc.z + cam.cx, cam.fy * pc.y / pc.z + cam.cy};
}

struct Ray {
    Vec3 origin;
    Vec3 direction;  // unit
};

// World-space viewing ray through a (sub-)pixel.
inline Ray pixel_ray(const CameraModel& cam, const Vec2& px) {
    const Vec3 dir_cam{(px.x - cam.cx) / cam.fx, (px.y - cam.cy) / cam.fy, 1.0};
    return {cam.position(), (cam.rotation.transposed() * dir_cam).normalized()};
}

// Build a camera-from-world pose looking from `eye` toward `target`, with
// the image "up" roughly aligned to world +z. Looking straight up or down
// falls back to image-right = world +x.
inline CameraModel look_at(const Vec3& eye, const Vec3& target, double fx, double fy,
                           double cx, double cy) {
    const Vec3 fwd = (target - eye).normalized();
    const Vec3 world_up{0.0, 0.0, 1.0};
    Vec3 right = fwd.cross(world_up);
    if (right.norm() < 1e-9) right = Vec3{1.0, 0.0, 0.0};
    right = right.normalized();
    const Vec3 down = fwd.cross(right);
    CameraModel cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = cx;
    cam.cy = cy;
    cam.rotation = Mat3::from_rows(right, down, fwd);
    cam.translation = cam.rotation * (-eye);
    return cam;
}

}  // namespace foldkit
