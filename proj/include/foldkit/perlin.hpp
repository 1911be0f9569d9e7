#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include "foldkit/common.hpp"
#include "foldkit/rng.hpp"
#include "foldkit/vec.hpp"

namespace foldkit {

struct PerlinParams {
    int octaves = 1;
    double frequency = 1.0;  // lattice cells per unit of input space
    double amplitude = 1.0;  // output scale before the final clamp
    uint64_t seed = 0;
};

// Classic gradient noise on a 2D lattice with a seeded permutation table.
// Octaves stack at doubled frequency and halved gain, renormalized so the
// result stays in [-1, 1] before the amplitude scale.
class PerlinNoise {
  public:
    explicit PerlinNoise(const PerlinParams& params) : params_(params) {
        if (params.octaves < 1) throw ArgumentError("perlin: octaves must be >= 1");
        RandomStream rng(params.seed, 0x5045524cull);
        for (int i = 0; i < 256; ++i) perm_[static_cast<size_t>(i)] = static_cast<uint8_t>(i);
        for (int i = 255; i > 0; --i) {
            const auto j = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(i) + 1));
            std::swap(perm_[static_cast<size_t>(i)], perm_[static_cast<size_t>(j)]);
        }
    }

    // Value in [-1, 1]; exactly 0 at lattice points for a single octave.
    double at(double x, double y) const {
        double sum = 0.0;
        double gain = 1.0;
        double gain_total = 0.0;
        double fx = x * params_.frequency;
        double fy = y * params_.frequency;
        for (int o = 0; o < params_.octaves; ++o) {
            sum += gain * lattice_noise(fx, fy);
            gain_total += gain;
            gain *= 0.5;
            fx *= 2.0;
            fy *= 2.0;
        }
        // Single-octave lattice noise is bounded by sqrt(2)/2.
        const double v = params_.amplitude * sum / (gain_total * 0.70710678118654752440);
        return std::clamp(v, -1.0, 1.0);
    }

    double at(const Vec2& p) const { return at(p.x, p.y); }

  private:
    static double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }
    static double lerp(double a, double b, double t) { return a + t * (b - a); }

    uint8_t hash(int x, int y) const {
        return perm_[static_cast<size_t>(
            (perm_[static_cast<size_t>(x & 255)] + y) & 255)];
    }

    static double grad_dot(uint8_t h, double dx, double dy) {
        switch (h & 7) {
            case 0: return dx + dy;
            case 1: return dx - dy;
            case 2: return -dx + dy;
            case 3: return -dx - dy;
            case 4: return dx;
            case 5: return -dx;
            case 6: return dy;
            default: return -dy;
        }
    }

    double lattice_noise(double x, double y) const {
        const double xf = std::floor(x);
        const double yf = std::floor(y);
        const int xi = static_cast<int>(xf);
        const int yi = static_cast<int>(yf);
        const double dx = x - xf;
        const double dy = y - yf;
        const double u = fade(dx);
        const double v = fade(dy);
        const double n00 = grad_dot(hash(xi, yi), dx, dy);
        const double n10 = grad_dot(hash(xi + 1, yi), dx - 1.0, dy);
        const double n01 = grad_dot(hash(xi, yi + 1), dx, dy - 1.0);
        const double n11 = grad_dot(hash(xi + 1, yi + 1), dx - 1.0, dy - 1.0);
        return lerp(lerp(n00, n10, u), lerp(n01, n11, u), v);
    }

    PerlinParams params_;
    std::array<uint8_t, 256> perm_{};
};

inline double perlin_noise(const Vec2& p, const PerlinParams& params) {
    return PerlinNoise(params).at(p);
}

}  // namespace foldkit
