#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "foldkit/perlin.hpp"
#include "foldkit/rng.hpp"

using foldkit::PerlinNoise;
using foldkit::PerlinParams;
using foldkit::RandomStream;
using foldkit::Vec2;

TEST_CASE("random streams are reproducible and stream-separated", "[rng]") {
    RandomStream a(123, 0), b(123, 0), c(123, 1);
    for (int i = 0; i < 64; ++i) {
        const uint64_t va = a.next_u64();
        REQUIRE(va == b.next_u64());
    }
    bool differs = false;
    RandomStream a2(123, 0);
    for (int i = 0; i < 64; ++i) differs |= (a2.next_u64() != c.next_u64());
    REQUIRE(differs);
}

TEST_CASE("uniform draws stay in range and look flat", "[rng]") {
    RandomStream rng(7);
    int buckets[10] = {};
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        buckets[static_cast<int>(u * 10.0)]++;
    }
    for (int count : buckets) {
        REQUIRE(count > n / 10 - 1000);
        REQUIRE(count < n / 10 + 1000);
    }
}

TEST_CASE("uniform_int covers [0,n) without gaps", "[rng]") {
    RandomStream rng(9);
    int seen[7] = {};
    for (int i = 0; i < 7000; ++i) seen[rng.uniform_int(7)]++;
    for (int count : seen) REQUIRE(count > 0);
}

TEST_CASE("normal draws have roughly unit moments", "[rng]") {
    RandomStream rng(11);
    double sum = 0.0, sum2 = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        sum += v;
        sum2 += v * v;
    }
    REQUIRE(std::abs(sum / n) < 0.02);
    REQUIRE(std::abs(sum2 / n - 1.0) < 0.03);
}

TEST_CASE("perlin is zero at lattice points for one octave", "[perlin]") {
    PerlinParams params;
    params.octaves = 1;
    params.frequency = 1.0;
    params.seed = 4;
    PerlinNoise noise(params);
    for (int x = -3; x <= 3; ++x)
        for (int y = -3; y <= 3; ++y)
            REQUIRE(noise.at(x, y) == 0.0);
}

TEST_CASE("perlin with zero amplitude is identically zero", "[perlin]") {
    PerlinParams params;
    params.amplitude = 0.0;
    params.octaves = 3;
    params.frequency = 5.0;
    REQUIRE(foldkit::perlin_noise({0.37, -1.22}, params) == 0.0);
    REQUIRE(foldkit::perlin_noise({12.9, 3.01}, params) == 0.0);
}

TEST_CASE("perlin is deterministic, bounded and continuous", "[perlin]") {
    PerlinParams params;
    params.octaves = 3;
    params.frequency = 8.0;
    params.seed = 21;
    PerlinNoise noise(params);
    PerlinNoise same(params);
    RandomStream rng(2);
    double max_jump = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Vec2 p{rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)};
        const double v = noise.at(p);
        REQUIRE(v == same.at(p));
        REQUIRE(v >= -1.0);
        REQUIRE(v <= 1.0);
        max_jump = std::max(max_jump, std::abs(v - noise.at(p.x + 1e-5, p.y)));
        max_jump = std::max(max_jump, std::abs(v - noise.at(p.x, p.y + 1e-5)));
    }
    REQUIRE(max_jump < 1e-3);
}

TEST_CASE("perlin rejects octaves < 1", "[perlin]") {
    PerlinParams params;
    params.octaves = 0;
    REQUIRE_THROWS_AS(PerlinNoise(params), foldkit::ArgumentError);
}
