#pragma once

#include <array>
#include <string>

#include "foldkit/vec.hpp"

namespace foldkit {

// Ground-truth corner locations for one rendered image. Pixel coordinates
// are sub-pixel, u right / v down, pixel centers at integer coordinates.
// corners_px is always populated for all four corners; `visible` marks the
// ones that are inside the frame and not occluded by a distractor.
struct KeypointAnnotation {
    std::array<Vec2, 4> corners_px{};
    std::array<bool, 4> visible{false, false, false, false};
    std::string image_id;

    int visible_count() const {
        int n = 0;
        for (bool v : visible) n += v ? 1 : 0;
        return n;
    }
};

}  // namespace foldkit
