#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "foldkit/annotation.hpp"
#include "foldkit/common.hpp"
#include "foldkit/tensor.hpp"
#include "foldkit/vec.hpp"

namespace foldkit {

struct Heatmap {
    int width = 0;
    int height = 0;
    std::vector<float> values;  // row-major, [0,1]

    Heatmap() = default;
    Heatmap(int w, int h) : width(w), height(h), values(size_t(w) * size_t(h), 0.0f) {}

    float at(int u, int v) const { return values[size_t(v) * size_t(width) + size_t(u)]; }
    float& at(int u, int v) { return values[size_t(v) * size_t(width) + size_t(u)]; }

    static Heatmap from_tensor(const Tensor<float>& t) {
        if (t.rank() != 4 || t.dim(0) != 1 || t.dim(1) != 1)
            throw ShapeError("heatmap: expected (1,1,H,W) tensor, got " + t.shape_str());
        Heatmap h(static_cast<int>(t.dim(3)), static_cast<int>(t.dim(2)));
        std::copy(t.data(), t.data() + t.numel(), h.values.begin());
        return h;
    }
};

struct DetectedKeypoint {
    int u = 0;
    int v = 0;
    float probability = 0.0f;
};

// Pixel-wise maximum over unnormalized Gaussians centred on each keypoint.
// The heatmap grid is evaluated at integer pixel coordinates, so a keypoint
// at an integer location has a peak of exactly 1.
inline Heatmap render_target(const std::vector<Vec2>& keypoints, double sigma_px,
                             int width, int height) {
    if (sigma_px <= 0.0) throw ArgumentError("render_target: sigma must be > 0");
    Heatmap h(width, height);
    if (keypoints.empty()) return h;
    const double inv = 1.0 / (2.0 * sigma_px * sigma_px);
    for (int v = 0; v < height; ++v) {
        for (int u = 0; u < width; ++u) {
            double best = 0.0;
            for (const Vec2& k : keypoints) {
                const double du = u - k.x;
                const double dv = v - k.y;
                best = std::max(best, std::exp(-(du * du + dv * dv) * inv));
            }
            h.at(u, v) = static_cast<float>(best);
        }
    }
    return h;
}

// Local-maxima extraction with a square max-filter window (border-clipped).
// A pixel is a candidate when it reaches the maximum of its window and is at
// least min_probability. Candidates of equal value that touch (8-connected)
// form a plateau; each plateau reports its lexicographically smallest (v,u)
// pixel. Results are sorted by descending probability, ties by (v,u).
inline std::vector<DetectedKeypoint> extract_keypoints(const Heatmap& h,
                                                       double min_probability,
                                                       int window) {
    if (window < 3 || window % 2 == 0)
        throw ArgumentError("extract_keypoints: window must be odd and >= 3");
    if (min_probability <= 0.0 || min_probability >= 1.0)
        throw ArgumentError("extract_keypoints: min_probability must be in (0,1)");
    const int W = h.width, H = h.height;
    const int r = window / 2;
    std::vector<uint8_t> candidate(size_t(W) * size_t(H), 0);
    for (int v = 0; v < H; ++v) {
        for (int u = 0; u < W; ++u) {
            const float val = h.at(u, v);
            if (val < min_probability) continue;
            bool is_max = true;
            const int v0 = std::max(0, v - r), v1 = std::min(H - 1, v + r);
            const int u0 = std::max(0, u - r), u1 = std::min(W - 1, u + r);
            for (int vv = v0; vv <= v1 && is_max; ++vv)
                for (int uu = u0; uu <= u1; ++uu)
                    if (h.at(uu, vv) > val) {
                        is_max = false;
                        break;
                    }
            if (is_max) candidate[size_t(v) * size_t(W) + size_t(u)] = 1;
        }
    }

    // Collapse plateaus of equal-valued touching candidates.
    std::vector<DetectedKeypoint> out;
    std::vector<uint8_t> seen(size_t(W) * size_t(H), 0);
    std::vector<std::pair<int, int>> stack;
    for (int v = 0; v < H; ++v) {
        for (int u = 0; u < W; ++u) {
            const size_t idx = size_t(v) * size_t(W) + size_t(u);
            if (!candidate[idx] || seen[idx]) continue;
            const float val = h.at(u, v);
            int best_u = u, best_v = v;
            stack.clear();
            stack.emplace_back(u, v);
            seen[idx] = 1;
            while (!stack.empty()) {
                const auto [cu, cv] = stack.back();
                stack.pop_back();
                if (cv < best_v || (cv == best_v && cu < best_u)) {
                    best_u = cu;
                    best_v = cv;
                }
                for (int dv = -1; dv <= 1; ++dv) {
                    for (int du = -1; du <= 1; ++du) {
                        const int nu = cu + du, nv = cv + dv;
                        if (nu < 0 || nu >= W || nv < 0 || nv >= H) continue;
                        const size_t nidx = size_t(nv) * size_t(W) + size_t(nu);
                        if (seen[nidx] || !candidate[nidx] || h.at(nu, nv) != val)
                            continue;
                        seen[nidx] = 1;
                        stack.emplace_back(nu, nv);
                    }
                }
            }
            out.push_back({best_u, best_v, val});
        }
    }
    std::sort(out.begin(), out.end(), [](const DetectedKeypoint& a, const DetectedKeypoint& b) {
        if (a.probability != b.probability) return a.probability > b.probability;
        if (a.v != b.v) return a.v < b.v;
        return a.u < b.u;
    });
    return out;
}

struct ImageDetections {
    std::string image_id;
    std::vector<DetectedKeypoint> keypoints;
};

struct DetectionMetrics {
    double ap = 0.0;
    double threshold_px = 0.0;
    int64_t n_images = 0;
    int64_t n_detections = 0;
};

// Pooled average precision. Detections from all images are ranked together
// by probability; each one greedily matches the nearest unmatched visible
// ground-truth corner of its own image within the pixel threshold. The
// score is the area under the precision envelope (all-points
// interpolation).
inline DetectionMetrics average_precision(const std::vector<ImageDetections>& detections,
                                          const std::vector<KeypointAnnotation>& truths,
                                          double threshold_px) {
    std::map<std::string, size_t> truth_index;
    for (size_t i = 0; i < truths.size(); ++i) truth_index[truths[i].image_id] = i;

    struct Ranked {
        float probability;
        size_t image;
        int u, v;
    };
    std::vector<Ranked> ranked;
    for (const ImageDetections& img : detections) {
        const auto it = truth_index.find(img.image_id);
        if (it == truth_index.end())
            throw ArgumentError("average_precision: unknown image_id '" + img.image_id + "'");
        for (const DetectedKeypoint& k : img.keypoints)
            ranked.push_back({k.probability, it->second, k.u, k.v});
    }
    std::sort(ranked.begin(), ranked.end(), [&truths](const Ranked& a, const Ranked& b) {
        if (a.probability != b.probability) return a.probability > b.probability;
        if (a.image != b.image)
            return truths[a.image].image_id < truths[b.image].image_id;
        if (a.v != b.v) return a.v < b.v;
        return a.u < b.u;
    });

    int64_t total_gt = 0;
    for (const KeypointAnnotation& t : truths) total_gt += t.visible_count();

    DetectionMetrics m;
    m.threshold_px = threshold_px;
    m.n_images = static_cast<int64_t>(truths.size());
    m.n_detections = static_cast<int64_t>(ranked.size());
    if (total_gt == 0 || ranked.empty()) return m;

    std::vector<std::array<bool, 4>> matched(truths.size(), {false, false, false, false});
    std::vector<uint8_t> is_tp(ranked.size(), 0);
    for (size_t k = 0; k < ranked.size(); ++k) {
        const Ranked& d = ranked[k];
        const KeypointAnnotation& gt = truths[d.image];
        int best = -1;
        double best_dist = threshold_px;
        for (int c = 0; c < 4; ++c) {
            if (!gt.visible[size_t(c)] || matched[d.image][size_t(c)]) continue;
            const double dist =
                (gt.corners_px[size_t(c)] - Vec2{double(d.u), double(d.v)}).norm();
            if (dist <= best_dist) {
                best_dist = dist;
                best = c;
            }
        }
        if (best >= 0) {
            matched[d.image][size_t(best)] = true;
            is_tp[k] = 1;
        }
    }

    // Precision envelope: max precision over all ranks >= k.
    const size_t n = ranked.size();
    std::vector<double> precision(n);
    int64_t tp = 0;
    for (size_t k = 0; k < n; ++k) {
        tp += is_tp[k];
        precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    }
    for (size_t k = n - 1; k-- > 0;) precision[k] = std::max(precision[k], precision[k + 1]);
    double ap = 0.0;
    for (size_t k = 0; k < n; ++k)
        if (is_tp[k]) ap += precision[k] / static_cast<double>(total_gt);
    m.ap = ap;
    return m;
}

}  // namespace foldkit
