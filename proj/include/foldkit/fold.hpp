#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "foldkit/common.hpp"
#include "foldkit/geometry.hpp"
#include "foldkit/scene.hpp"
#include "foldkit/vec.hpp"

namespace foldkit {

struct FoldParams {
    double arc_height = 0.15;       // apex cap, meters
    int n_waypoints = 16;
    double pregrasp_offset = 0.05;  // outward horizontal offset, meters

    void validate() const {
        if (arc_height <= 0.0) throw ConfigError("fold params: 'arc_height' must be > 0");
        if (n_waypoints < 2) throw ConfigError("fold params: 'n_waypoints' must be >= 2");
        if (pregrasp_offset < 0.0)
            throw ConfigError("fold params: 'pregrasp_offset' must be >= 0");
    }
};

struct ToleranceParams {
    double grasp_m = 0.02;    // max distance of the grasp point to the true edge midpoint
    double fold_frac = 0.1;   // corner error budget as a fraction of the folded length
};

// Scripted pregrasp/grasp/arc plan in table-frame coordinates.
struct FoldPlan {
    Vec3 pregrasp_position;
    Vec3 pregrasp_approach;  // unit, horizontal, pointing into the towel
    Vec3 grasp_position;
    Vec3 grasp_approach;
    std::vector<Vec3> arc_waypoints;
    Vec3 fold_line_point;
    Vec3 fold_line_direction;  // unit, in-plane

    FoldPlan translated(const Vec3& offset) const {
        FoldPlan p = *this;
        p.pregrasp_position += offset;
        p.grasp_position += offset;
        p.fold_line_point += offset;
        for (Vec3& w : p.arc_waypoints) w += offset;
        return p;
    }
};

struct FoldOutcome {
    bool aborted = false;
    bool grasp_success = false;
    bool fold_success = false;
    std::array<double, 2> corner_errors_m{std::numeric_limits<double>::infinity(),
                                          std::numeric_limits<double>::infinity()};
    double grasp_error_m = std::numeric_limits<double>::infinity();
};

// Plan the fold for a towel frame. The grasped side is the frame's first
// ordered side (c0,c1); the fold line is the towel center line through the
// centroid parallel to that side; the trajectory is a vertical-plane
// semi-ellipse from the grasp point to its mirror image, apex at
// min(arc_height, half the travel distance).
inline FoldPlan plan_fold(const TowelFrame& frame, const FoldParams& params) {
    params.validate();
    const Vec3& x = frame.x_axis;
    const Vec3& y = frame.y_axis;
    const Vec3& z = frame.z_axis;

    FoldPlan plan;
    plan.grasp_position = (frame.ordered_corners[0] + frame.ordered_corners[1]) / 2.0;
    plan.fold_line_point = frame.origin;
    plan.fold_line_direction = x;

    // Mirror the grasp point across the fold line within the plane.
    const Vec3 d = plan.grasp_position - frame.origin;
    const Vec3 mirrored =
        frame.origin + x * d.dot(x) - y * d.dot(y) + z * d.dot(z);
    const double travel = (mirrored - plan.grasp_position).norm();
    if (travel < 1e-9)
        throw GeometryError("plan_fold: grasp point lies on the fold line");
    const Vec3 along = (mirrored - plan.grasp_position) / travel;
    const Vec3 mid = (plan.grasp_position + mirrored) / 2.0;
    const double radius = travel / 2.0;
    const double apex = std::min(params.arc_height, radius);
    plan.arc_waypoints.resize(static_cast<size_t>(params.n_waypoints));
    for (int i = 0; i < params.n_waypoints; ++i) {
        const double t = static_cast<double>(i) / (params.n_waypoints - 1);
        const double phi = kPi * (1.0 - t);
        plan.arc_waypoints[size_t(i)] =
            mid + along * (radius * std::cos(phi)) + z * (apex * std::sin(phi));
    }
    plan.arc_waypoints.front() = plan.grasp_position;
    plan.arc_waypoints.back() = mirrored;

    // The towel interior lies on the +y side of the (c0,c1) edge, so the
    // outward approach offset points along -y and the approach motion +y.
    plan.pregrasp_position = plan.grasp_position - y * params.pregrasp_offset;
    plan.pregrasp_approach = y;
    plan.grasp_approach = y;
    return plan;
}

namespace detail {

inline Vec2 reflect_across_line(const Vec2& p, const Vec2& line_point, const Vec2& dir) {
    const Vec2 d = p - line_point;
    const Vec2 par = dir * d.dot(dir);
    const Vec2 perp = d - par;
    return line_point + par - perp;
}

}  // namespace detail

// Geometric fold proxy. The towel is taken flat on the table (everything is
// evaluated in the table plane):
//   - grasp succeeds when the planned grasp point is within tol.grasp_m of
//     the nearest true edge midpoint;
//   - the towel half on the grasp side of the fold line reflects across the
//     line; corner errors are the distances of the two reflected corners to
//     their opposing true corners (best one-to-one pairing);
//   - the fold succeeds when the grasp did and both errors are at most
//     tol.fold_frac times the true fold-direction length.
// Failures are outcomes, not errors.
inline FoldOutcome simulate_fold(const TowelGeometry& towel, const FoldPlan& plan,
                                 const ToleranceParams& tol) {
    FoldOutcome out;
    std::array<Vec2, 4> corners;
    {
        const auto c3 = towel.corners_3d();
        for (int i = 0; i < 4; ++i) corners[size_t(i)] = c3[size_t(i)].xy();
    }
    const Vec2 grasp = plan.grasp_position.xy();

    // Nearest true side midpoint.
    for (int i = 0; i < 4; ++i) {
        const Vec2 mid = (corners[size_t(i)] + corners[size_t((i + 1) % 4)]) / 2.0;
        out.grasp_error_m = std::min(out.grasp_error_m, (grasp - mid).norm());
    }
    out.grasp_success = out.grasp_error_m <= tol.grasp_m;

    const Vec2 line_point = plan.fold_line_point.xy();
    Vec2 dir = plan.fold_line_direction.xy();
    if (dir.norm() < 1e-12) return out;  // vertical fold line: no in-plane fold
    dir = dir.normalized();
    auto side_of = [&](const Vec2& p) { return dir.cross(p - line_point); };
    const double grasp_side = side_of(grasp);
    if (grasp_side == 0.0) return out;

    std::vector<int> near_side, far_side;
    for (int i = 0; i < 4; ++i)
        (side_of(corners[size_t(i)]) * grasp_side >= 0.0 ? near_side : far_side).push_back(i);

    // Fold-direction length: distance between the grasped edge midpoint and
    // the opposite edge midpoint of the true towel.
    auto edge_midpoint = [&corners](const std::vector<int>& pair) {
        return (corners[size_t(pair[0])] + corners[size_t(pair[1])]) / 2.0;
    };

    if (near_side.size() != 2 || far_side.size() != 2) {
        // The planned fold line does not bisect the towel; call the entire
        // towel length the error.
        const double span = std::max(towel.width, towel.height);
        out.corner_errors_m = {span, span};
        out.fold_success = false;
        return out;
    }

    const double fold_length = (edge_midpoint(near_side) - edge_midpoint(far_side)).norm();
    const Vec2 r0 = detail::reflect_across_line(corners[size_t(near_side[0])], line_point, dir);
    const Vec2 r1 = detail::reflect_across_line(corners[size_t(near_side[1])], line_point, dir);
    const Vec2& t0 = corners[size_t(far_side[0])];
    const Vec2& t1 = corners[size_t(far_side[1])];
    const double straight = (r0 - t0).norm() + (r1 - t1).norm();
    const double crossed = (r0 - t1).norm() + (r1 - t0).norm();
    if (straight <= crossed)
        out.corner_errors_m = {(r0 - t0).norm(), (r1 - t1).norm()};
    else
        out.corner_errors_m = {(r0 - t1).norm(), (r1 - t0).norm()};

    const double budget = tol.fold_frac * fold_length;
    out.fold_success = out.grasp_success && out.corner_errors_m[0] <= budget &&
                       out.corner_errors_m[1] <= budget;
    return out;
}

}  // namespace foldkit
